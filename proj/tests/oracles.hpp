#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace gstam::oracle {

using Points = std::vector<std::vector<double>>;

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline std::vector<double> mean_of(const Points& pts, const std::vector<std::size_t>& idx) {
  std::vector<double> m(pts.front().size(), 0.0);
  for (std::size_t i : idx) {
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += pts[i][k];
  }
  for (double& v : m) v /= static_cast<double>(idx.size());
  return m;
}

inline double herding_gap(const Points& pts, const std::vector<std::size_t>& chosen) {
  std::vector<std::size_t> all(pts.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return distance(mean_of(pts, all), mean_of(pts, chosen));
}

// Visits every ordered k-tuple of distinct indices below n, in lexicographic order.
inline void for_each_tuple(std::size_t n, std::size_t k,
                           const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> tuple;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&] {
    if (tuple.size() == k) {
      visit(tuple);
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = true;
      tuple.push_back(i);
      rec();
      tuple.pop_back();
      used[i] = false;
    }
  };
  rec();
}

// Herding's objective is the sequence of gaps between the class mean and the
// mean of each prefix of the selection. The exhaustive optimum is the ordered
// tuple whose gap sequence is lexicographically smallest, earliest tuple on ties.
inline std::vector<std::size_t> herding_exhaustive(const Points& pts, std::size_t k) {
  std::vector<std::size_t> best;
  std::vector<double> best_gaps;
  for_each_tuple(pts.size(), k, [&](const std::vector<std::size_t>& t) {
    std::vector<double> gaps;
    for (std::size_t len = 1; len <= k; ++len) {
      gaps.push_back(herding_gap(pts, std::vector<std::size_t>(t.begin(), t.begin() + len)));
    }
    if (best.empty() || gaps < best_gaps) {
      best = t;
      best_gaps = gaps;
    }
  });
  return best;
}

// Smallest set-level gap over all unordered k-subsets.
inline double herding_best_subset_gap(const Points& pts, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  for_each_tuple(pts.size(), k, [&](const std::vector<std::size_t>& t) {
    if (std::is_sorted(t.begin(), t.end())) best = std::min(best, herding_gap(pts, t));
  });
  return best;
}

inline double covering_radius(const Points& pts, const std::vector<std::size_t>& centers) {
  double radius = 0.0;
  for (const auto& p : pts) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) nearest = std::min(nearest, distance(p, pts[c]));
    radius = std::max(radius, nearest);
  }
  return radius;
}

inline double kcenter_optimal_radius(const Points& pts, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  for_each_tuple(pts.size(), k, [&](const std::vector<std::size_t>& t) {
    if (std::is_sorted(t.begin(), t.end())) best = std::min(best, covering_radius(pts, t));
  });
  return best;
}

// Fraction of (positive, negative) pairs ordered correctly, ties counting 1/2.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double concordant = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return concordant / pairs;
}

}  // namespace gstam::oracle

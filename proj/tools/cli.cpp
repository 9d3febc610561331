#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gstam/coreset.hpp"
#include "gstam/distiller.hpp"
#include "gstam/errors.hpp"
#include "gstam/evaluation.hpp"
#include "gstam/graph_data.hpp"

namespace gstam::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Settings {
  // shared
  std::string dataset;
  std::string format = "tu";
  std::string name;
  std::string out = ".";
  std::string config_path;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t gpc = 1;
  std::string arch = "gcn3";
  std::size_t hidden = 128;
  // distill
  std::size_t iters = 1000;
  double feature_lr = 0.005;
  double adj_lr = 0.01;
  double lambda = 0.1;
  double p = 2.0;
  std::size_t batch = 256;
  std::string init = "kcenter";
  double threshold = 0.5;
  // baseline
  std::string method;
  std::string embedding = "trained";
  std::size_t embed_epochs = 50;
  // evaluate
  std::vector<std::string> condensed;
  std::size_t epochs = 500;
  double eval_lr = 0.001;
  std::size_t repeats = 0;
  std::size_t models = 10;
  std::string metric = "accuracy";
  std::vector<std::string> cross_arch;
  std::size_t eval_batch = 0;
  bool full = false;
};

// Registers flags and remembers how to fill each one from a JSON config
// file; values from the config apply only to flags absent on the command line.
class Binder {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, target, help)->capture_default_str();
    const std::string key = flag.substr(2);
    entries_[app].push_back({key, opt, [&target](const json& j) { target = j.get<T>(); }});
    return opt;
  }

  void apply_config(CLI::App* app, const json& config) const {
    const auto it = entries_.find(app);
    if (it == entries_.end()) return;
    for (const Entry& e : it->second) {
      if (e.option->count() > 0 || !config.contains(e.key)) continue;
      try {
        e.assign(config.at(e.key));
      } catch (const json::exception& ex) {
        throw ConfigError("config key '" + e.key + "': " + ex.what());
      }
    }
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* option;
    std::function<void(const json&)> assign;
  };
  std::map<const CLI::App*, std::vector<Entry>> entries_;
};

void add_common(Binder& b, CLI::App* app, Settings& s) {
  b.add(app, "--dataset", s.dataset, "TU dataset directory or JSON dataset file");
  b.add(app, "--format", s.format, "Dataset format")->check(CLI::IsMember({"tu", "json"}));
  b.add(app, "--name", s.name, "TU dataset name (defaults to the directory name)");
  b.add(app, "--out", s.out, "Output directory");
  b.add(app, "--seed", s.seed, "Run seed");
  b.add(app, "--split-seed", s.split_seed, "Seed of the train/val/test split");
  b.add(app, "--gpc", s.gpc, "Graphs per class")->check(CLI::PositiveNumber);
  b.add(app, "--arch", s.arch, "GNN architecture (gcn2, gcn3, gin, ...)");
  b.add(app, "--hidden", s.hidden, "Hidden width of conv layers")->check(CLI::PositiveNumber);
  app->add_option("--config", s.config_path, "JSON config file; flags override it");
}

fs::path resolve_dataset_path(const Settings& s) {
  if (s.dataset.empty()) throw ConfigError("--dataset is required");
  fs::path p(s.dataset);
  if (fs::exists(p)) return p;
  const fs::path bundled = fs::path("data") / s.dataset;
  if (fs::exists(bundled)) return bundled;
  throw IngestionError("dataset not found: " + p.string());
}

std::string tu_name(const Settings& s, const fs::path& dir) {
  if (!s.name.empty()) return s.name;
  fs::path clean = dir.lexically_normal();
  std::string name = clean.filename().string();
  if (name.empty()) name = clean.parent_path().filename().string();
  return name;
}

GraphDataset load_dataset(const Settings& s) {
  const fs::path path = resolve_dataset_path(s);
  const std::uint64_t split = derive_seed(s.split_seed, "split");
  if (s.format == "json") return load_json_dataset(path, split);
  GraphDataset ds = load_tu_dataset(path, tu_name(s, path));
  return random_split(std::move(ds), split);
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

json dataset_summary(const Settings& s, const GraphDataset& ds) {
  return {{"path", s.dataset},
          {"format", s.format},
          {"name", ds.name},
          {"fingerprint", hex(dataset_fingerprint(ds))},
          {"graphs", ds.graphs.size()},
          {"num_classes", ds.num_classes},
          {"feature_dim", ds.feature_dim},
          {"split_seed", s.split_seed},
          {"split_sizes", {ds.split.train.size(), ds.split.val.size(), ds.split.test.size()}}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream f(path);
  if (!f) throw ExportError("cannot write " + path.string());
  f << doc.dump(2) << '\n';
  if (!f) throw ExportError("write failed for " + path.string());
}

fs::path ensure_out_dir(const Settings& s) {
  fs::path dir(s.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw ExportError("cannot create output directory " + dir.string());
  return dir;
}

GnnConfig arch_config(const std::string& text, const Settings& s, int num_classes) {
  return parse_arch(text, num_classes, s.hidden);
}

int cmd_distill(const Settings& s, const std::vector<std::string>& argv, std::ostream& out) {
  DistillConfig cfg;
  cfg.graphs_per_class = s.gpc;
  cfg.iterations = s.iters;
  cfg.feature_lr = s.feature_lr;
  cfg.adjacency_lr = s.adj_lr;
  cfg.lambda = s.lambda;
  cfg.p = s.p;
  cfg.real_batch_size = s.batch;
  cfg.init = parse_init_mode(s.init);
  cfg.seed = s.seed;
  cfg.validate();
  const GraphDataset ds = load_dataset(s);
  cfg.model = arch_config(s.arch, s, ds.num_classes);
  const fs::path dir = ensure_out_dir(s);

  const DistillReport report = distill(ds, cfg);

  json config_echo = config_to_json(report.config);
  config_echo["dataset"] = ds.name;
  config_echo["split_seed"] = s.split_seed;
  config_echo["nodes"] = report.nodes;
  export_synthetic(report.synthetic, ds.num_classes, config_echo, dir / "synthetic.json",
                   s.threshold);

  {
    std::ofstream csv(dir / "loss.csv");
    if (!csv) throw ExportError("cannot write " + (dir / "loss.csv").string());
    csv << "iteration,stam,reg,total";
    for (std::size_t l = 0; l < cfg.model.num_conv_layers; ++l) csv << ",layer_" << (l + 1);
    csv << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < report.loss_history.size(); ++t) {
      const LossBreakdown& b = report.loss_history[t];
      csv << (t + 1) << ',' << b.stam << ',' << b.reg << ',' << b.total;
      for (double v : b.per_layer) csv << ',' << v;
      csv << '\n';
    }
    if (!csv) throw ExportError("write failed for loss.csv");
  }

  json manifest;
  manifest["command"] = "distill";
  manifest["argv"] = argv;
  manifest["config"] = config_echo;
  manifest["threshold"] = s.threshold;
  manifest["dataset"] = dataset_summary(s, ds);
  manifest["seeds"] = {{"run", s.seed},
                       {"split", s.split_seed},
                       {"init", derive_seed(s.seed, "init")},
                       {"theta", "derive_seed(run, \"theta\", t)"},
                       {"batch", "derive_seed(run, \"batch\", t)"}};
  manifest["outputs"] = {"synthetic.json", "loss.csv", "manifest.json"};
  manifest["wall_seconds"] = report.wall_seconds;
  write_json(dir / "manifest.json", manifest);

  const LossBreakdown& last = report.loss_history.back();
  out << "distilled " << report.synthetic.size() << " graphs (" << report.nodes
      << " nodes each) in " << std::fixed << std::setprecision(1) << report.wall_seconds
      << " s; final loss " << std::setprecision(6) << last.total << " -> " << dir.string() << '\n';
  return 0;
}

int cmd_baseline(const Settings& s, const std::vector<std::string>& argv, std::ostream& out) {
  if (s.method != "random" && s.method != "herding" && s.method != "kcenter") {
    throw ConfigError("unknown method '" + s.method + "' (expected one of random, herding, kcenter)");
  }
  if (s.embedding != "trained" && s.embedding != "raw") {
    throw ConfigError("unknown embedding '" + s.embedding + "' (expected trained or raw)");
  }
  const GraphDataset ds = load_dataset(s);
  const fs::path dir = ensure_out_dir(s);
  std::vector<std::size_t> picks;
  json seeds = {{"run", s.seed}, {"split", s.split_seed}};
  if (s.method == "random") {
    picks = select_random(ds, s.gpc, derive_seed(s.seed, "random"));
  } else {
    EmbeddingTable table;
    if (s.embedding == "raw") {
      table = raw_mean_embeddings(ds);
    } else {
      // The embedding network belongs to the split, not the run, so herding
      // and k-center stay independent of --seed.
      const std::uint64_t embed_seed = derive_seed(s.split_seed, "embedding");
      seeds["embedding"] = embed_seed;
      TrainOptions opts{.epochs = s.embed_epochs, .lr = s.eval_lr, .batch_size = 32};
      table = trained_embeddings(ds, arch_config(s.arch, s, ds.num_classes), opts, embed_seed);
    }
    picks = s.method == "herding" ? select_herding(table, s.gpc) : select_kcenter(table, s.gpc);
  }

  GraphDataset subset;
  subset.name = ds.name;
  subset.num_classes = ds.num_classes;
  subset.feature_dim = ds.feature_dim;
  for (std::size_t i : picks) subset.graphs.push_back(ds.graphs[i]);
  save_json_dataset(subset, dir / "subset.json", &picks);

  json manifest;
  manifest["command"] = "baseline";
  manifest["argv"] = argv;
  manifest["method"] = s.method;
  manifest["graphs_per_class"] = s.gpc;
  manifest["embedding"] = s.method == "random" ? "none" : s.embedding;
  manifest["embed_epochs"] = s.embed_epochs;
  manifest["arch"] = s.arch;
  manifest["dataset"] = dataset_summary(s, ds);
  manifest["seeds"] = seeds;
  manifest["selected"] = picks;
  manifest["outputs"] = {"subset.json", "manifest.json"};
  write_json(dir / "manifest.json", manifest);

  out << s.method << ": selected " << picks.size() << " graphs -> " << (dir / "subset.json").string()
      << '\n';
  return 0;
}

struct LoadedSet {
  CondensedSet set;
  std::string method;
  std::string train_arch;
};

LoadedSet load_condensed(const fs::path& path, const GraphDataset& ds, const Settings& s) {
  LoadedSet loaded;
  GraphDataset graphs = load_json_graphs(path, &loaded.set.source_indices);
  if (graphs.feature_dim != ds.feature_dim || graphs.num_classes != ds.num_classes) {
    throw ConfigError(path.string() + ": feature width or class count differs from the dataset");
  }
  if (graphs.graphs.empty()) throw ConfigError(path.string() + ": no graphs");
  loaded.set.graphs = std::move(graphs.graphs);

  std::ifstream in(path);
  const json doc = json::parse(in);
  if (doc.contains("config") && doc["config"].contains("model")) {
    loaded.method = "gstam";
    const json& m = doc["config"]["model"];
    loaded.train_arch = parse_arch(m.value("arch", std::string("gcn")) +
                                       std::to_string(m.value("num_conv_layers", 3)),
                                   ds.num_classes, s.hidden)
                            .name();
  } else {
    loaded.method = doc.value("method", std::string("subset"));
    loaded.train_arch = "-";
  }
  return loaded;
}

int cmd_evaluate(const Settings& s, CLI::App* app, const std::vector<std::string>& argv,
                 std::ostream& out) {
  if (s.condensed.empty() && !s.full) {
    throw ConfigError("no condensed sets given (pass one or more JSON files, or --full)");
  }
  const GraphDataset ds = load_dataset(s);
  const fs::path dir = ensure_out_dir(s);

  std::vector<CondensedSet> sets;
  std::string method = "full";
  std::string train_arch = "-";
  EvalConfig cfg;
  cfg.train = TrainOptions{.epochs = s.epochs, .lr = s.eval_lr, .batch_size = s.eval_batch};
  cfg.models_per_set = s.models;
  cfg.metric = parse_metric(s.metric);
  if (s.full) {
    const std::size_t copies = s.repeats == 0 ? 1 : s.repeats;
    for (std::size_t r = 0; r < copies; ++r) sets.push_back(full_training_set(ds));
    if (cfg.train.batch_size == 0) cfg.train.batch_size = 32;
  } else {
    for (const std::string& f : s.condensed) {
      LoadedSet l = load_condensed(f, ds, s);
      method = l.method;
      train_arch = l.train_arch;
      sets.push_back(std::move(l.set));
    }
    if (s.repeats != 0 && s.repeats != sets.size()) {
      throw ConfigError("--repeats " + std::to_string(s.repeats) + " but " +
                        std::to_string(sets.size()) + " condensed files were given");
    }
  }
  cfg.distill_repeats = sets.size();

  std::vector<GnnConfig> archs;
  if (!s.cross_arch.empty()) {
    for (const std::string& a : s.cross_arch) archs.push_back(arch_config(a, s, ds.num_classes));
  } else if (app->get_option("--arch")->count() == 0 && train_arch != "-") {
    archs.push_back(arch_config(train_arch, s, ds.num_classes));
  } else {
    archs.push_back(arch_config(s.arch, s, ds.num_classes));
  }

  const std::uint64_t eval_seed = derive_seed(s.seed, "eval");
  const std::vector<EvalResult> results = cross_architecture(ds, sets, archs, cfg, eval_seed);

  const fs::path csv_path = dir / "results.csv";
  const bool fresh = !fs::exists(csv_path);
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw ExportError("cannot write " + csv_path.string());
  if (fresh) csv << "dataset,method,graphs_per_class,ratio,arch_train,arch_test,metric,mean,std,runs\n";
  const std::size_t set_size = sets.front().graphs.size();
  const double ratio = static_cast<double>(set_size) / static_cast<double>(ds.split.train.size());
  const std::size_t gpc = s.full ? 0 : set_size / static_cast<std::size_t>(ds.num_classes);
  for (const EvalResult& r : results) {
    csv << ds.name << ',' << method << ',' << gpc << ',' << std::setprecision(6) << ratio << ','
        << train_arch << ',' << r.architecture << ',' << r.metric << ',' << std::setprecision(10)
        << r.mean << ',' << r.std << ',' << r.runs.size() << '\n';
    const double scale = r.metric == "accuracy" ? 100.0 : 1.0;
    out << ds.name << ' ' << method << " gpc=" << gpc << ' ' << r.architecture << ": " << r.metric
        << ' ' << std::fixed << std::setprecision(r.metric == "accuracy" ? 2 : 3) << r.mean * scale
        << " ± " << r.std * scale << " (" << r.runs.size() << " runs)\n";
    out.unsetf(std::ios::fixed);
  }
  if (!csv) throw ExportError("write failed for " + csv_path.string());

  json manifest;
  manifest["command"] = "evaluate";
  manifest["argv"] = argv;
  manifest["dataset"] = dataset_summary(s, ds);
  manifest["condensed"] = s.condensed;
  manifest["optimizer"] = "adam";
  manifest["epochs"] = cfg.train.epochs;
  manifest["lr"] = cfg.train.lr;
  manifest["batch_size"] = cfg.train.batch_size;
  manifest["models_per_set"] = cfg.models_per_set;
  manifest["metric"] = metric_name(cfg.metric);
  manifest["seeds"] = {{"run", s.seed}, {"split", s.split_seed}, {"eval", eval_seed}};
  json rows = json::array();
  for (const EvalResult& r : results) {
    rows.push_back({{"arch", r.architecture}, {"mean", r.mean}, {"std", r.std}, {"runs", r.runs}});
  }
  manifest["results"] = rows;
  write_json(dir / "evaluate_manifest.json", manifest);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph dataset condensation by structural attention matching"};
  app.require_subcommand(1);
  Settings s;
  Binder binder;

  CLI::App* distill_cmd = app.add_subcommand("distill", "Learn a synthetic graph set");
  add_common(binder, distill_cmd, s);
  binder.add(distill_cmd, "--iters", s.iters, "Distillation iterations")->check(CLI::PositiveNumber);
  binder.add(distill_cmd, "--feature-lr", s.feature_lr, "Node feature learning rate");
  binder.add(distill_cmd, "--adj-lr", s.adj_lr, "Adjacency logit learning rate");
  binder.add(distill_cmd, "--lambda", s.lambda, "Weight of the head-output matching term");
  binder.add(distill_cmd, "--p", s.p, "Exponent of the attention map");
  binder.add(distill_cmd, "--batch", s.batch, "Real graphs per class per iteration")->check(CLI::PositiveNumber);
  binder.add(distill_cmd, "--init", s.init, "Synthetic initialization")->check(CLI::IsMember({"random", "kcenter"}));
  binder.add(distill_cmd, "--threshold", s.threshold, "Edge threshold on sigmoid(logit) at export");

  CLI::App* baseline_cmd = app.add_subcommand("baseline", "Select a coreset of real graphs");
  add_common(binder, baseline_cmd, s);
  binder.add(baseline_cmd, "--method", s.method, "Selection method")
      ->check(CLI::IsMember({"random", "herding", "kcenter"}));
  binder.add(baseline_cmd, "--embedding", s.embedding, "Embedding space for herding/kcenter")
      ->check(CLI::IsMember({"trained", "raw"}));
  binder.add(baseline_cmd, "--embed-epochs", s.embed_epochs, "Training epochs of the embedding GNN");
  binder.add(baseline_cmd, "--eval-lr", s.eval_lr, "Learning rate of the embedding GNN");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Train fresh GNNs on condensed sets and test them");
  add_common(binder, evaluate_cmd, s);
  evaluate_cmd->add_option("condensed", s.condensed, "Synthetic or subset JSON files");
  binder.add(evaluate_cmd, "--epochs", s.epochs, "Training epochs per model");
  binder.add(evaluate_cmd, "--eval-lr", s.eval_lr, "Adam learning rate");
  binder.add(evaluate_cmd, "--repeats", s.repeats, "Expected number of condensed sets (0 = any)");
  binder.add(evaluate_cmd, "--models", s.models, "Models trained per condensed set")->check(CLI::PositiveNumber);
  binder.add(evaluate_cmd, "--metric", s.metric, "accuracy or roc_auc")->check(CLI::IsMember({"accuracy", "roc_auc"}));
  binder.add(evaluate_cmd, "--cross-arch", s.cross_arch, "Test architectures, comma separated")->delimiter(',');
  binder.add(evaluate_cmd, "--eval-batch", s.eval_batch, "Mini-batch size (0 = full batch)");
  evaluate_cmd->add_flag("--full", s.full, "Evaluate the whole training split instead");

  try {
    std::vector<std::string> args(argv.rbegin(), argv.rend());
    if (!args.empty()) args.pop_back();
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (!s.config_path.empty()) {
      std::ifstream in(s.config_path);
      if (!in) throw ConfigError("cannot open config file " + s.config_path);
      json config;
      try {
        in >> config;
      } catch (const json::exception& e) {
        throw ConfigError(s.config_path + ": " + e.what());
      }
      binder.apply_config(active, config);
    }
    if (active == distill_cmd) return cmd_distill(s, argv, out);
    if (active == baseline_cmd) return cmd_baseline(s, argv, out);
    return cmd_evaluate(s, active, argv, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IngestionError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gstam::cli

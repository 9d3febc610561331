#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gstam::cli {

// Runs one `gstam` invocation. argv[0] is the program name. Returns the
// process exit code: 0 on success, 2 for usage/config/ingestion errors,
// 1 for failures during compute or output.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace gstam::cli

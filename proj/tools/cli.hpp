#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dbfgm::cli {

inline constexpr const char* version = "1.0.0";

/// Runs one command line (args[0] is the program name). Returns 0 on
/// success, 1 on validation errors and 2 on numerical failures; errors are
/// reported as one JSON object on `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace dbfgm::cli

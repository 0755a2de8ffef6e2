#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace navmr::cli {

inline constexpr const char* kVersion = "0.1.0";

// Runs one subcommand and returns its exit code: 0 success, 2 usage or
// configuration error, 3 data error, 4 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// Same, with argv[0] supplied.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace navmr::cli

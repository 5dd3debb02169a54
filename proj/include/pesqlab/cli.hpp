#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pesqlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kReportSchemaVersion = 1;

// Entry point of the `pesqlab` tool; args exclude the program name. Returns
// the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

// Comma-separated list of finite numbers, e.g. "1,10,100".
std::vector<double> parse_grid(const std::string& text);

}  // namespace pesqlab

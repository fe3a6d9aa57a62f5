#pragma once

#include <string>
#include <vector>

namespace nfsense::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kDataError = 3;
inline constexpr int kNumerical = 4;
inline constexpr int kMemoryBudget = 5;

int run(int argc, char** argv);
int run(std::vector<std::string> args); // args exclude the program name

} // namespace nfsense::cli

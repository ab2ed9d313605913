#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace foliage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, bad config keys or values, missing input files.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entry point shared by the `foliage` binary and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace foliage::cli

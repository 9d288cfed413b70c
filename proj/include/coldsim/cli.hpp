#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coldsim {

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point shared by the coldsim binary and the tests. Returns the process
// exit status: 0 success, 2 usage or input error, 1 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coldsim

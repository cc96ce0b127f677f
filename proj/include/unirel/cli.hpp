#pragma once

#include <string>
#include <vector>

namespace unirel::cli {

// Entry point shared by the binary and the tests; args exclude the program
// name. Returns the process exit code: 0 success, 2 configuration, 3 io,
// 4 contract violation.
int run(const std::vector<std::string>& args);

}  // namespace unirel::cli

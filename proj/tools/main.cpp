#include <string>
#include <vector>

#include "unirel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return unirel::cli::run(args);
}

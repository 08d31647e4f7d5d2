#include <iostream>
#include <string>
#include <vector>

#include "qedet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qedet::cli::run(args, std::cout, std::cerr);
}

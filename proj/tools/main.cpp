#include <iostream>
#include <string>
#include <vector>

#include "ske/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ske::cli::run(args, std::cout, std::cerr);
}

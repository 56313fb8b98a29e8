#include <iostream>
#include <string>
#include <vector>

#include "advs/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return advs::run_cli(args, std::cout, std::cerr);
}

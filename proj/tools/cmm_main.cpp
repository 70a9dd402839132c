#include <iostream>
#include <string>
#include <vector>

#include "cmm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cmm::run_cli(args, std::cout, std::cerr);
}

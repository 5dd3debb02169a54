#include <iostream>
#include <string>
#include <vector>

#include "pesqlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pesqlab::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "persona/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return persona::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "hgd/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return hgd::run_cli(args, std::cout, std::cerr);
}

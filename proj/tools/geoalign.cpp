#include <iostream>

#include "geoalign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return geoalign::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "fusion_probe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fusion_probe::cli::run(args, std::cout, std::cerr);
}

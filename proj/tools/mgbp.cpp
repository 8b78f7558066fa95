#include <iostream>
#include <string>
#include <vector>

#include "mgbp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mgbp::cli::run(args, std::cout, std::cerr);
}

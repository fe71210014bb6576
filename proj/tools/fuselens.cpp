#include <iostream>
#include <string>
#include <vector>

#include "fuselens/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fuselens::cli::run(args, std::cout, std::cerr);
}

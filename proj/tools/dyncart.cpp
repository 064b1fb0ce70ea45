#include <iostream>
#include <string>
#include <vector>

#include "dyncart/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dyncart::run(args, std::cout, std::cerr);
}

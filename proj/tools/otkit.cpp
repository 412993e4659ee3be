#include <iostream>
#include <string>
#include <vector>

#include "otk/io.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return otk::run_command(args, std::cout, std::cerr);
}

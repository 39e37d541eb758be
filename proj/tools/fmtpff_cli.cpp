#include <iostream>
#include <string>
#include <vector>

#include "fmtpff/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fmtpff::run_cli(args, std::cout, std::cerr);
}

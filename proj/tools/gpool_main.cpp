#include <iostream>

#include "gpool/commands.hpp"

int main(int argc, char** argv) {
  return gpool::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

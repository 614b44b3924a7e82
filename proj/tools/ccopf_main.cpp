#include <iostream>

#include "ccopf/cli.hpp"

int main(int argc, char** argv) {
  return ccopf::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}

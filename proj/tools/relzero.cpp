#include <iostream>

#include "relzero/cli.hpp"

int main(int argc, char** argv) {
  return relzero::cli::run(argc, argv, std::cout, std::cerr);
}

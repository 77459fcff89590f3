#include <iostream>

#include "bundle_newton/cli.hpp"

int main(int argc, char** argv) {
  return bundle_newton::cli::main_entry(argc, argv, std::cout, std::cerr);
}

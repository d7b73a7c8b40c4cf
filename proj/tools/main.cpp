#include "auditionlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return auditionlab::run_cli(argc, argv, std::cout, std::cerr);
}

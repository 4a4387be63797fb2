#include <iostream>

#include "warprnn/cli.hpp"

int main(int argc, char** argv) {
  return warprnn::run_cli(argc, argv, std::cout, std::cerr);
}

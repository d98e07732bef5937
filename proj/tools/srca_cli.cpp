#include <iostream>

#include "srca/cli.hpp"

int main(int argc, char** argv) { return srca::cli::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "sassopt/cli.hpp"

int main(int argc, char** argv) { return sassopt::run_cli(argc, argv, std::cout, std::cerr); }

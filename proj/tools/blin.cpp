#include <iostream>

#include "blin/cli.hpp"

int main(int argc, char** argv) { return blin::cli::run(argc, argv, std::cout, std::cerr); }

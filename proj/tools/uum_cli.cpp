#include "uum/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return uum::run_cli(argc, argv, std::cout, std::cerr); }

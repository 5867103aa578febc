#include <iostream>

#include "emctl/commands.hpp"

int main(int argc, char** argv) { return emctl::run_cli(argc, argv, std::cout, std::cerr); }

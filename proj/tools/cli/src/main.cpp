#include <iostream>

#include "sahnet/cli/commands.hpp"

int main(int argc, char** argv) { return sahnet::cli::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "evmpc/cli.hpp"

int main(int argc, char** argv) { return evmpc::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "nv/cli.hpp"

int main(int argc, char** argv) { return nv::run_cli(argc, argv, std::cout, std::cerr); }

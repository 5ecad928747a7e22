#include <iostream>

#include "rydemu/cli.hpp"

int main(int argc, char** argv) { return rydemu::run_cli(argc, argv, std::cout, std::cerr); }

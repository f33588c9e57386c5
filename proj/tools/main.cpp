#include "varjm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return varjm::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "tbent/cli.hpp"

int main(int argc, char** argv) { return tbent::run_cli(argc, argv, std::cout, std::cerr); }

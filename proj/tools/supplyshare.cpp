#include <iostream>

#include "supplyshare/cli.hpp"

int main(int argc, char** argv) { return supplyshare::run_cli(argc, argv, std::cout, std::cerr); }

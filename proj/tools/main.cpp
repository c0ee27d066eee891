#include <iostream>

#include "skeval/cli.hpp"

int main(int argc, char** argv) { return skeval::run_cli(argc, argv, std::cout, std::cerr); }

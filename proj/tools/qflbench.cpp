#include "qfl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qfl::run_cli(argc, argv, std::cout, std::cerr); }

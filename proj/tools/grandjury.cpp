#include <iostream>

#include "grandjury/cli.hpp"

int main(int argc, char** argv) { return grandjury::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "unseg/cli.hpp"

int main(int argc, char** argv) { return unseg::cli::run(argc, argv, std::cout, std::cerr); }

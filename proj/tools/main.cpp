#include <iostream>

#include "ial/cli.hpp"

int main(int argc, char** argv) { return ial::cli::run(argc, argv, std::cout, std::cerr); }

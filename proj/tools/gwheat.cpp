#include <iostream>

#include "gwheat/cli.hpp"

int main(int argc, char** argv) { return gwheat::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "kwave/cli.hpp"

int main(int argc, char** argv) { return kwave::cli::run(argc, argv, std::cout, std::cerr); }

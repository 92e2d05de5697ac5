#include "ew/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ew::cli::run(argc, argv, std::cout, std::cerr); }

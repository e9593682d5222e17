#include "posecal/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return posecal::run_cli(argc, argv, std::cout, std::cerr); }

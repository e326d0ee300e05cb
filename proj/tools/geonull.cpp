#include <geonull/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return geonull::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "acm_cli.hpp"

int main(int argc, char** argv) { return acm::cli::run_cli(argc, argv, std::cout, std::cerr); }

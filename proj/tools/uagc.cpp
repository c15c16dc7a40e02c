#include <iostream>

#include "uagc/cli.hpp"

int main(int argc, char** argv) { return uagc::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "crowdnav/cli.hpp"

int main(int argc, char** argv) { return crowdnav::cli::run(argc, argv, std::cout, std::cerr); }

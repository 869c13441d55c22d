#include <iostream>

#include "ds2dp/cli.hpp"

int main(int argc, char **argv) { return ds2dp::cli::run(argc, argv, std::cout, std::cerr); }

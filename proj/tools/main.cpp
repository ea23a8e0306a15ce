#include "seqcast/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return seqcast::cli::run_cli(argc, argv, std::cout, std::cerr);
}

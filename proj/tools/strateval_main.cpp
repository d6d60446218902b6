#include <iostream>

#include "strateval/cli.hpp"

int main(int argc, char** argv) {
    return strateval::cli::run_cli(argc, argv, std::cout, std::cerr);
}

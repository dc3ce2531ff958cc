#include <iostream>

#include "eshlab/cli.hpp"

int main(int argc, char** argv) {
    return eshlab::cli_main(argc, argv, std::cout, std::cerr);
}

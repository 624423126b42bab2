#include <iostream>

#include "s2s/cli.hpp"

int main(int argc, char** argv) {
    return s2s::run_cli(argc, argv, std::cout, std::cerr);
}

#include <iostream>

#include "w2s/cli.hpp"

int main(int argc, char** argv) {
    return w2s::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "vts/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vts::cli::run(args, std::cout, std::cerr);
}

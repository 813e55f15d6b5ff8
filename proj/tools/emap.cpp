#include <iostream>
#include <string>
#include <vector>

#include "emap/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return emap::cli::dispatch(args, std::cout, std::cerr);
}

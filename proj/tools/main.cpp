#include <iostream>

#include "hopon/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hopon::cli::execute(args, std::cout, std::cerr).exit_code;
}

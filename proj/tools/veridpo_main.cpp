#include <string>
#include <vector>

#include "veridpo/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return veridpo::cli::run(args);
}

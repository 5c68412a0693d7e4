#include <string>
#include <vector>

#include "chunkalign/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return chunkalign::cli::run(args);
}

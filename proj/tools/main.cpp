#include <iostream>
#include <string>
#include <vector>

#include "experiment.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return dbsde::app::run(args, std::cout, std::cerr);
}

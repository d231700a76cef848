// main.cpp: spinboson command-line entry point

#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return sb::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

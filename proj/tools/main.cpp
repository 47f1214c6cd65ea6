#include <iostream>

#include "liftcam/cli.hpp"

int main(int argc, char** argv) { return liftcam::run_cli(argc, argv, std::cout, std::cerr); }

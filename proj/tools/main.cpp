#include <iostream>

#include "enkbf/cli.hpp"

int main(int argc, char** argv) { return enkbf::dispatch(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "kpca_ood/cli.hpp"

int main(int argc, char** argv) { return kpca_ood::cli::run(argc, argv, std::cout, std::cerr); }

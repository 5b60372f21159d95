// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "metasurf_cli/cli.hpp"

int main(int argc, char** argv) { return metasurf::cli::run(argc, argv, std::cout, std::cerr); }

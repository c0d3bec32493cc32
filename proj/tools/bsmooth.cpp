#include "cli.hpp"

int main(int argc, char** argv) { return bsmooth::cli::run(argc, argv); }

#include "semloc/cli.hpp"

int main(int argc, char** argv) { return semloc::cli::run(argc, argv); }

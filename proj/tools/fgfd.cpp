#include "fgfd/cli.hpp"

int main(int argc, char** argv) { return fgfd::cli::run(argc, argv); }

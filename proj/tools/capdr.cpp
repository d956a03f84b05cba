#include "capdr/cli.hpp"

int main(int argc, char** argv) { return capdr::cli::main(argc, argv); }

#include "lrpsges/cli.hpp"

int main(int argc, char** argv) { return lrpsges::cli::run(argc, argv); }

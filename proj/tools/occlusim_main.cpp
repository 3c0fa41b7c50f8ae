#include "occlusim/cli.hpp"

int main(int argc, char** argv) { return occlusim::cli::run(argc, argv); }

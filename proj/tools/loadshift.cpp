#include "loadshift/cli.hpp"

int main(int argc, char** argv) { return loadshift::cli::run(argc, argv); }

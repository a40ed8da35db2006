#include "flowmap/cli.hpp"

int main(int argc, char** argv) { return flowmap::cli::run(argc, argv); }

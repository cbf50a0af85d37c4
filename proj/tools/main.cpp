#include "ggap/cli.hpp"

int main(int argc, char** argv) { return ggap::cli::run_cli(argc, argv); }

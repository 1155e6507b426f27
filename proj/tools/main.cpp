#include "rbn/cli.hpp"

int main(int argc, char** argv) { return rbn::run_cli(argc, argv); }

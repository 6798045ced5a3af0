#include "driftlim/cli.hpp"

int main(int argc, char** argv) { return driftlim::run_cli(argc, argv); }

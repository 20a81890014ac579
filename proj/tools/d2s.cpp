#include "d2s/cli.hpp"

int main(int argc, char** argv) { return d2s::run_cli(argc, argv); }

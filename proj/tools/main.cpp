#include "broadrefine/cli.hpp"

int main(int argc, char** argv) { return broadrefine::run_cli(argc, argv); }

#include "clusterdyn/cli.hpp"

int main(int argc, char** argv) { return clusterdyn::run_cli(argc, argv); }

#include "mtft/cli.hpp"

int main(int argc, char** argv) { return mtft::run_cli(argc, argv); }

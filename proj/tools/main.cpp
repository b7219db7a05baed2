#include "dencgp/cli.hpp"

int main(int argc, char** argv) { return dencgp::run_cli(argc, argv); }

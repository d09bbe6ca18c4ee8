#include "deepcmc/cli.hpp"

int main(int argc, char** argv) { return deepcmc::run_cli(argc, argv); }

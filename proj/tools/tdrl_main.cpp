#include "tdrl/cli.hpp"

int main(int argc, char** argv) { return tdrl::run_cli(argc, argv); }

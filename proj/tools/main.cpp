#include "bvcl/cli.hpp"

int main(int argc, char** argv) { return bvcl::run_cli(argc, argv); }

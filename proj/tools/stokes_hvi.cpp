#include "shvi/cli.hpp"

int main(int argc, char** argv) { return shvi::cli_main(argc, argv); }

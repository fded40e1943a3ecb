#include "fellerdyn/cli.hpp"

int main(int argc, char** argv) { return fellerdyn::run_cli(argc, argv); }

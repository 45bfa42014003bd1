#include "flexfor/cli.hpp"

int main(int argc, char** argv) { return flexfor::cli::run(argc, argv); }

#include "cli.hpp"

int main(int argc, char** argv) { return hyspec::cli::run(argc, argv); }

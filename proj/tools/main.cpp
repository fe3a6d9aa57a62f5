#include "cli.hpp"

int main(int argc, char** argv) { return nfsense::cli::run(argc, argv); }

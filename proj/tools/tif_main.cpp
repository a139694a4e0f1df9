#include "commands.hpp"

int main(int argc, char** argv) { return tif::cli::run(argc, argv); }

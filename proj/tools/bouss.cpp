#include "bouss/cli.hpp"

int main(int argc, char** argv) { return bouss::cli::run(argc, argv); }

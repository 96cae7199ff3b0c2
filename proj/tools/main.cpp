#include "overlap_tomo/cli.hpp"

int main(int argc, char** argv) { return overlap_tomo::cli::run(argc, argv); }

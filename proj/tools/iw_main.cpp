#include "iw/cli.hpp"

int main(int argc, char** argv) { return iw::cli::run(argc, argv); }

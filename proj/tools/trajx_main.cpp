#include "trajx/cli.hpp"

int main(int argc, char** argv) { return trajx::cli::run(argc, argv); }

#include "drift/cli/commands.hpp"

int main(int argc, char** argv) { return drift::cli::run_main(argc, argv); }

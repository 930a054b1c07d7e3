#include "commands.hpp"

int main(int argc, char** argv) { return pagkit::cli::run_cli(argc, argv); }

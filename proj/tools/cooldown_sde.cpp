#include "cooldown/cli.hpp"

int main(int argc, char** argv) { return cooldown::cli::main_impl(argc, argv); }

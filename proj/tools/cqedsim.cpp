#include "cqed/cli.hpp"

int main(int argc, char** argv) { return cqed::cli::main_entry(argc, argv); }

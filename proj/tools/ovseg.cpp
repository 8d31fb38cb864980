#include "ovseg/cli/commands.hpp"

int main(int argc, char** argv) { return ovseg::cli::run(argc, argv); }

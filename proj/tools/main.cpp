#include "commands.hpp"

int main(int argc, char** argv) { return mvfmm::cli::run(argc, argv); }

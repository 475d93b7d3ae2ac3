#include "commands.hpp"

int main(int argc, char** argv) { return ltlm::cli::run(argc, argv); }

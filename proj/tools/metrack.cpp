#include "metrack/cli.hpp"

int main(int argc, char** argv) { return metrack::cli::run(argc, argv); }

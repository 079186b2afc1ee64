#include "qsp/cli_runner.hpp"

int main(int argc, char** argv) { return qsp::run_cli(argc, argv); }

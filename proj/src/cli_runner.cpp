#include "qsp/cli_runner.hpp"

#include <cstdio>

namespace qsp {

int run_cli(int, char**) {
    std::puts("not wired up yet");
    return 1;
}

} // namespace qsp

#pragma once

namespace qsp {

// Entry point behind the command line tool; lives in the library so tests can
// drive the exact code path the binary runs.
int run_cli(int argc, char** argv);

} // namespace qsp

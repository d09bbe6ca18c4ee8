#pragma once

namespace deepcmc {

// Command-line front end: gen | train | compress | decompress | eval | sweep.
// Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run_cli(int argc, const char* const* argv);

}  // namespace deepcmc

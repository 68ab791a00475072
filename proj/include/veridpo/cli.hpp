#pragma once

// CLI entry point, callable in-process so the end-to-end pipeline (including
// file IO) is exercisable from tests. The binary in tools/ is a thin wrapper.

#include <string>
#include <vector>

namespace veridpo::cli {

// argv-style arguments without the program name; returns the exit status.
int run(const std::vector<std::string>& args);

}  // namespace veridpo::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semcom::cli {

// Entry point behind the semcom binary. Verbs: train | sweep | metrics |
// report. Flags: --config PATH, --out DIR, --set KEY=VALUE (repeatable),
// --seed N. Returns the process exit status: 0 success, 1 validation error,
// 2 runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace semcom::cli

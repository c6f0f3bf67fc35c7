// cli.hpp — command dispatch; the binary forwards argv here so tests can run
// commands in-process

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ske::cli {

// Returns the process exit code: 0 ok, 1 schema/validation, 2 capacity,
// 3 numerical singularity.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ske::cli

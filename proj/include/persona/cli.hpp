#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace persona {

/// Entry point behind the `persona` binary. Returns 0 on success, 1 for
/// invalid input or flags, 2 for failures while running.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace persona

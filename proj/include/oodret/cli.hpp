#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oodret {

/// Runs one `oodret` invocation. `args` excludes the program name. Errors go
/// to `err` as {"error": {"code", "message"}} and give a nonzero status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oodret

#pragma once

#include <ostream>

namespace auditionlab {

/// Exit codes: 0 success, 1 validation or usage failure, 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace auditionlab

#pragma once

#include <iosfwd>

namespace metaems::cli {

// Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metaems::cli

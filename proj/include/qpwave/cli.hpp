#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qpwave {

// Exit codes: 0 success, 1 usage error, 2 domain rejection.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpwave

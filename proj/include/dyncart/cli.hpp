#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dyncart {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalid = 2;

// Entry point behind the dyncart executable. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dyncart

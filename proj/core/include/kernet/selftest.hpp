#pragma once

#include <iosfwd>

namespace kernet::selftest {

/// Runs the library invariant suite, printing one PASS/FAIL line per
/// property. Returns true when every property holds.
bool run(std::ostream& os);

}  // namespace kernet::selftest

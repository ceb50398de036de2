#pragma once

#include <cstdint>
#include <ostream>

namespace tiltrisk {

// Quick internal consistency checks on simulated data: estimator
// reductions, parameterization equivalence, brute-force agreement,
// influence-value centering and the eta round trip. Prints one line per
// check and returns the number of failures.
int run_selftest(std::uint64_t seed, std::ostream& out);

}  // namespace tiltrisk

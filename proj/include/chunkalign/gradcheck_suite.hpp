#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chunkalign::num {

struct CheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Finite-difference verification of every kernel gradient rule on several
// random shapes, plus tape compositions up to the full encoder + total-loss
// path at toy dimensions. `corrupt` deliberately breaks one rule (negative
// control for the CLI's exit code).
std::vector<CheckResult> run_gradcheck_suite(uint64_t seed, bool corrupt = false);

}  // namespace chunkalign::num

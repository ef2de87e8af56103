#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glt/gradcheck.hpp"

namespace glt {

struct SuiteCheck {
    std::string name;
    GradCheckReport report;
    double tolerance = 0.0;

    bool passed() const { return report.passed(tolerance); }
};

struct SuiteOptions {
    std::uint64_t seed = 0;
    // Routes the linear-layer check through an operation whose backward pass
    // doubles the gradient, so that check must fail.
    bool inject_fault = false;
    double layer_tolerance = 1e-4;
    double model_tolerance = 1e-3;
};

/// Finite-difference checks of every layer type, one attention layer, one
/// global-local block, a toy-width backbone and a toy global-local model,
/// all in double precision.
std::vector<SuiteCheck> run_gradcheck_suite(const SuiteOptions& options = {});

} // namespace glt

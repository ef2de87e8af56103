#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "glt/tensor.hpp"

namespace glt {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::vector<std::pair<std::string, double>> per_parameter_errors;
    // Parameters whose analytic or numeric gradient contained NaN/Inf.
    std::vector<std::string> non_finite;
    std::size_t coordinates = 0;
    // Coordinates left out because the probe straddled a non-differentiable point.
    std::size_t skipped_nonsmooth = 0;

    // At most 5% of coordinates may be skipped as non-smooth.
    bool passed(double tolerance) const
    {
        return non_finite.empty() && max_relative_error < tolerance && skipped_nonsmooth * 20 <= coordinates;
    }
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares the gradients produced by backward() on a scalar-valued function with
/// central finite differences. The function must read the given leaf tensors and
/// must be deterministic; the leaves are perturbed in place and restored.
///
/// With kink_tolerance > 0, a coordinate whose forward and backward one-sided
/// differences disagree by more than that relative error is counted as
/// non-smooth (a relu or max-pool switch inside the probe interval) and left out
/// of the maximum. A wrong analytic gradient cannot trigger this: the one-sided
/// differences agree wherever the function is smooth.
GradCheckReport gradcheck(const std::function<Tensor()>& f, const std::vector<NamedTensor>& inputs,
                          double step = 1e-5, double kink_tolerance = 0.0);

} // namespace glt

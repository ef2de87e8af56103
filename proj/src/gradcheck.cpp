#include "glt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "glt/error.hpp"

namespace glt {

double relative_error(double analytic, double numeric)
{
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

GradCheckReport gradcheck(const std::function<Tensor()>& f, const std::vector<NamedTensor>& inputs, double step,
                          double kink_tolerance)
{
    std::vector<Tensor> leaves;
    for (const auto& in : inputs) {
        if (!in.tensor.is_leaf()) throw ContractError("gradcheck: input '" + in.name + "' is not a leaf");
        leaves.push_back(in.tensor);
        leaves.back().set_requires_grad(true);
        leaves.back().zero_grad();
    }

    auto loss = f();
    if (loss.numel() != 1) throw ContractError("gradcheck: function is not scalar-valued");
    loss.backward();
    const double centre = loss.item();

    GradCheckReport report;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& leaf = leaves[k];
        std::vector<double> analytic(leaf.numel(), 0.0);
        if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

        double worst = 0.0;
        bool finite = true;
        auto values = leaf.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            double plus, minus;
            {
                NoGradGuard guard;
                values[i] = saved + step;
                plus = f().item();
                values[i] = saved - step;
                minus = f().item();
            }
            values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            ++report.coordinates;
            if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
                finite = false;
                continue;
            }
            if (kink_tolerance > 0.0 &&
                relative_error((plus - centre) / step, (centre - minus) / step) > kink_tolerance &&
                relative_error(analytic[i], numeric) > kink_tolerance) {
                ++report.skipped_nonsmooth;
                continue;
            }
            worst = std::max(worst, relative_error(analytic[i], numeric));
        }
        if (!finite) report.non_finite.push_back(inputs[k].name);
        report.per_parameter_errors.emplace_back(inputs[k].name, worst);
        report.max_relative_error = std::max(report.max_relative_error, worst);
    }
    return report;
}

} // namespace glt

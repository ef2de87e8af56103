#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "glt/tensor.hpp"

namespace glt::test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double central_difference(const std::function<double()>& f, double& x, double step = 1e-5)
{
    const double saved = x;
    x = saved + step;
    const double plus = f();
    x = saved - step;
    const double minus = f();
    x = saved;
    return (plus - minus) / (2.0 * step);
}

// Per-position form of scaled dot-product attention for one head:
// s_ij = q_i . k_j, w_ij = softmax_j(s_ij * scale), g_i = sum_j w_ij v_j.
// q [n2, d], k/v [n1, d] as flat row-major vectors; columns [c0, c0 + dh) form the head.
struct LoopAttention {
    std::vector<double> context; // [n2, d]
    std::vector<double> weights; // [heads, n2, n1]
};

inline LoopAttention loop_attention(const std::vector<double>& q, const std::vector<double>& k,
                                    const std::vector<double>& v, std::size_t n2, std::size_t n1, std::size_t d,
                                    std::size_t heads, double scale)
{
    const std::size_t dh = d / heads;
    LoopAttention out{std::vector<double>(n2 * d, 0.0), std::vector<double>(heads * n2 * n1, 0.0)};
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < n2; ++i) {
            std::vector<double> s(n1);
            for (std::size_t j = 0; j < n1; ++j) {
                double dot = 0.0;
                for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i * d + c] * k[j * d + c];
                s[j] = dot * scale;
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < n1; ++j) denom += std::exp(s[j]);
            for (std::size_t j = 0; j < n1; ++j) {
                const double w = std::exp(s[j]) / denom;
                out.weights[(h * n2 + i) * n1 + j] = w;
                for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) out.context[i * d + c] += w * v[j * d + c];
            }
        }
    return out;
}

} // namespace glt::test

#include "glt/layers.hpp"

#include <cmath>

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

namespace {

Tensor kaiming(Shape shape, std::size_t fan_in, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(values), true);
}

} // namespace

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), padding_(padding)
{
    if (in_channels == 0 || out_channels == 0 || kernel == 0)
        throw DimensionError("Conv2d: channel counts and kernel must be positive");
    weight = kaiming({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel, rng);
    bias = Tensor::zeros({out_channels}, true);
}

Tensor Conv2d::forward(const Tensor& x) const
{
    if (x.rank() != 4 || x.dim(1) != in_channels_)
        throw DimensionError("Conv2d: expected [B, " + std::to_string(in_channels_) + ", H, W], got " +
                             shape_str(x.shape()));
    return conv2d(x, weight, bias, padding_);
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    params.push_back({prefix + ".weight", weight});
    params.push_back({prefix + ".bias", bias});
}

BatchNorm2d::BatchNorm2d(std::size_t channels, double eps, double momentum)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(Tensor::zeros({channels})),
      running_var(Tensor::full({channels}, 1.0)),
      eps_(eps),
      momentum_(momentum)
{
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode)
{
    if (x.rank() != 4 || x.dim(1) != channels())
        throw DimensionError("BatchNorm2d: expected " + std::to_string(channels()) + " channels, got " +
                             shape_str(x.shape()));
    if (mode == Mode::eval) return batch_norm_eval(x, gamma, beta, running_mean.data(), running_var.data(), eps_);

    BatchStats stats;
    auto y = batch_norm_train(x, gamma, beta, eps_, &stats);
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    const double n = static_cast<double>(stats.count);
    const double unbias = n > 1 ? n / (n - 1) : 1.0;
    for (std::size_t c = 0; c < rm.size(); ++c) {
        rm[c] = (1.0 - momentum_) * rm[c] + momentum_ * stats.mean[c];
        rv[c] = (1.0 - momentum_) * rv[c] + momentum_ * stats.variance[c] * unbias;
    }
    return y;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    params.push_back({prefix + ".gamma", gamma});
    params.push_back({prefix + ".beta", beta});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const
{
    buffers.push_back({prefix + ".running_mean", running_mean});
    buffers.push_back({prefix + ".running_var", running_var});
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight(kaiming({out_features, in_features}, in_features, rng)), bias(Tensor::zeros({out_features}, true))
{
}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    params.push_back({prefix + ".weight", weight});
    params.push_back({prefix + ".bias", bias});
}

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding,
                     Rng& rng)
    : conv(in_channels, out_channels, kernel, padding, rng), bn(out_channels)
{
}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) { return relu(bn.forward(conv.forward(x), mode)); }

void ConvBlock::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    conv.collect(prefix + ".conv", params);
    bn.collect(prefix + ".bn", params);
}

void ConvBlock::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const
{
    bn.collect_buffers(prefix + ".bn", buffers);
}

double StepDecay::at(std::size_t epoch) const
{
    if (period == 0) return initial;
    return initial * std::pow(factor, static_cast<double>(epoch / period));
}

Adam::Adam(std::vector<NamedTensor> params, StepDecay schedule) : params_(std::move(params)), schedule_(schedule)
{
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Adam::step()
{
    for (const auto& p : params_)
        if (p.tensor.has_grad())
            for (double g : p.tensor.grad())
                if (!std::isfinite(g)) throw NumericalError("Adam: non-finite gradient in parameter '" + p.name + "'");

    ++steps_;
    const double lr = learning_rate();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto t = params_[k].tensor;
        auto values = t.mutable_data();
        const bool has = t.has_grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = has ? t.grad()[i] : 0.0;
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEpsilon);
        }
    }
    zero_grad();
}

void Adam::zero_grad()
{
    for (auto& p : params_) p.tensor.zero_grad();
}

} // namespace glt

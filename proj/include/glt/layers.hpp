#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "glt/gradcheck.hpp"
#include "glt/tensor.hpp"

namespace glt {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

/// 2D convolution, stride 1, square kernel. Output spatial size per axis is
/// (L + 2 * padding - kernel) + 1.
class Conv2d {
public:
    Conv2d() = default;
    // Kaiming-normal weights (std = sqrt(2 / fan_in)), zero bias.
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding, Rng& rng);

    Tensor forward(const Tensor& x) const;

    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return out_channels_; }
    std::size_t kernel() const { return kernel_; }
    std::size_t padding() const { return padding_; }

    Tensor weight; // [out, in, k, k]
    Tensor bias;   // [out]

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;

private:
    std::size_t in_channels_ = 0, out_channels_ = 0, kernel_ = 0, padding_ = 0;
};

/// Per-channel batch normalisation over (batch, height, width).
class BatchNorm2d {
public:
    static constexpr double kEpsilon = 1e-5;
    static constexpr double kMomentum = 0.1;

    BatchNorm2d() = default;
    explicit BatchNorm2d(std::size_t channels, double eps = kEpsilon, double momentum = kMomentum);

    // Train mode normalises with batch statistics and folds them into the
    // running estimates (unbiased variance); eval mode uses the running estimates.
    Tensor forward(const Tensor& x, Mode mode);

    std::size_t channels() const { return gamma.numel(); }
    double eps() const { return eps_; }

    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;

private:
    double eps_ = kEpsilon;
    double momentum_ = kMomentum;
};

class Linear {
public:
    Linear() = default;
    Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

    Tensor forward(const Tensor& x) const;

    Tensor weight; // [out, in]
    Tensor bias;   // [out]

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
};

/// conv3x3/1x1 -> batchnorm -> relu
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode);

    Conv2d conv;
    BatchNorm2d bn;

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;
};

/// lr(epoch) = initial * factor^floor(epoch / period)
struct StepDecay {
    double initial = 1e-4;
    std::size_t period = 25;
    double factor = 0.5;

    double at(std::size_t epoch) const;
};

class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    Adam(std::vector<NamedTensor> params, StepDecay schedule);

    void set_epoch(std::size_t epoch) { epoch_ = epoch; }
    double learning_rate() const { return schedule_.at(epoch_); }
    std::size_t step_count() const { return steps_; }

    /// One update from the accumulated gradients, then clears them. Parameters
    /// that received no gradient are treated as having a zero gradient. Throws
    /// NumericalError naming the parameter if a gradient is not finite.
    void step();
    void zero_grad();

private:
    std::vector<NamedTensor> params_;
    std::vector<std::vector<double>> m_, v_;
    StepDecay schedule_;
    std::size_t epoch_ = 0;
    std::size_t steps_ = 0;
};

} // namespace glt

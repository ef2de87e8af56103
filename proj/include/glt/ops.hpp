#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glt/tensor.hpp"

// Differentiable operations on Tensor. Every function checks shapes up front and
// throws DimensionError naming the offending shapes.
namespace glt {

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);

// reductions to a one-element tensor
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// layout
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x); // rank 2 only
Tensor permute(const Tensor& x, std::span<const std::size_t> order);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// out[i] = x[indices[i]] along axis 0
Tensor index_select(const Tensor& x, std::span<const std::size_t> indices);
// Spatial window of a [B, C, H, W] tensor.
Tensor crop(const Tensor& x, std::size_t row, std::size_t col, std::size_t height, std::size_t width);

// linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);    // [m,k] x [k,n]
Tensor bmm(const Tensor& a, const Tensor& b);       // [B,m,k] x [B,k,n]
Tensor softmax(const Tensor& x, std::size_t axis);  // max-subtracted

// neural network primitives, NCHW layout
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t padding);
Tensor maxpool2(const Tensor& x);
Tensor avgpool_global(const Tensor& x);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct BatchStats {
    std::vector<double> mean;
    std::vector<double> variance; // biased (divide by count)
    std::size_t count = 0;
};

// Normalises with the batch statistics of x and reports them through stats.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStats* stats = nullptr);
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       std::span<const double> running_mean, std::span<const double> running_var,
                       double eps);

} // namespace glt

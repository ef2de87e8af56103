#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    // Empty until a gradient is first accumulated.
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad and accumulates into the parents' grads.
    std::function<void(Node& self)> backward_fn;

    std::vector<double>& grad_buffer();
};

} // namespace detail

/// Dense row-major array of doubles that records the operations producing it so
/// that gradients can be propagated back to leaves with requires_grad set.
///
/// Tensors share their storage: copying a Tensor copies a handle, not the data.
/// Values produced by an operation are treated as immutable; only leaves are
/// mutated (parameter updates, initialisation, finite-difference probes).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    // Direct write access. Only meaningful on leaves.
    std::span<double> mutable_data();
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
    /// calls; intermediate gradients are reset on every call.
    void backward() const;

    /// Same values, cut from the graph.
    Tensor detach() const;
    Tensor clone() const;

    // Stable identity of the underlying storage.
    const void* id() const { return node_.get(); }

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op(Shape, std::vector<double>, const std::vector<Tensor>&,
                          std::function<void(detail::Node&)>);
};

/// Builds the result of a differentiable operation. When gradient recording is
/// enabled and any parent requires a gradient, the result keeps its parents and
/// the backward function; otherwise it is a plain constant.
Tensor make_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
               std::function<void(detail::Node&)> backward_fn);

bool grad_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

} // namespace glt

#include "glt/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "glt/error.hpp"

namespace glt {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::vector<double>& detail::Node::grad_buffer()
{
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

static void check_shape(const Shape& shape, std::size_t n)
{
    for (auto d : shape)
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != n)
        throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(n) + " values");
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad)
{
    check_shape(shape, data.size());
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const
{
    if (!node_) throw ContractError("use of an undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const
{
    const auto& s = shape();
    if (axis >= s.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const
{
    shape();
    return node_->data;
}

std::span<double> Tensor::mutable_data()
{
    shape();
    return node_->data;
}

double Tensor::item() const
{
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on)
{
    if (!is_leaf()) throw ContractError("requires_grad can only be changed on a leaf tensor");
    node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_ && !node_->backward_fn; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const
{
    if (!has_grad()) throw ContractError("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad()
{
    shape();
    return node_->grad_buffer();
}

void Tensor::zero_grad()
{
    if (node_) node_->grad.clear();
}

void Tensor::backward() const
{
    if (numel() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " + shape_str(shape()));
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            auto* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (auto* n : order)
        if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
    node_->grad_buffer()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

Tensor Tensor::detach() const
{
    auto node = std::make_shared<detail::Node>();
    node->shape = shape();
    node->data = node_->data;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const
{
    auto t = detach();
    t.node_->requires_grad = requires_grad();
    return t;
}

Tensor make_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
               std::function<void(detail::Node&)> backward_fn)
{
    check_shape(shape, data.size());
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (any) {
            node->requires_grad = true;
            for (const auto& p : parents) node->parents.push_back(p.node());
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

} // namespace glt

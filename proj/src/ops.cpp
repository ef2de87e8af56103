#include "glt/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "glt/error.hpp"

namespace glt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using detail::Node;

// Gradient buffer of parent i, or nullptr when that parent does not need one.
double* grad_of(Node& self, std::size_t i)
{
    auto& p = *self.parents[i];
    return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

const double* data_of(Node& self, std::size_t i) { return self.parents[i]->data.data(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op)
{
    if (x.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(x.shape()));
}

template <typename F, typename G>
Tensor unary(const Tensor& x, F forward, G derivative)
{
    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
    return make_op(x.shape(), std::move(out), {x}, [derivative](Node& self) {
        auto* gx = grad_of(self, 0);
        const auto* xd = data_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * derivative(xd[i]);
    });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    auto ad = a.data();
    auto bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (auto* g = grad_of(self, k))
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "sub");
    auto ad = a.data();
    auto bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (auto* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        if (auto* g = grad_of(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    auto ad = a.data();
    auto bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto* ad = data_of(self, 0);
        const auto* bd = data_of(self, 1);
        if (auto* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bd[i];
        if (auto* g = grad_of(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * ad[i];
    });
}

Tensor scale(const Tensor& a, double factor)
{
    return unary(a, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value)
{
    return unary(a, [value](double v) { return v + value; }, [](double) { return 1.0; });
}

Tensor relu(const Tensor& x)
{
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x)
{
    return unary(
        x, [](double v) { return std::fabs(v); },
        [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x)
{
    return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor sum(const Tensor& x)
{
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op({1}, {s}, {x}, [](Node& self) {
        auto* g = grad_of(self, 0);
        auto n = self.parents[0]->data.size();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& x)
{
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape)
{
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_op(std::move(shape), std::move(out), {x}, [](Node& self) {
        auto* g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor transpose(const Tensor& x)
{
    require_rank(x, 2, "transpose");
    const std::size_t order[2] = {1, 0};
    return permute(x, order);
}

Tensor permute(const Tensor& x, std::span<const std::size_t> order)
{
    const auto& in_shape = x.shape();
    const auto rank = in_shape.size();
    if (order.size() != rank)
        throw DimensionError("permute: order of length " + std::to_string(order.size()) + " for " +
                             shape_str(in_shape));
    std::vector<bool> used(rank, false);
    for (auto a : order) {
        if (a >= rank || used[a]) throw DimensionError("permute: invalid axis order for " + shape_str(in_shape));
        used[a] = true;
    }

    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
    Shape out_shape(rank);
    std::vector<std::size_t> step(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in_shape[order[i]];
        step[i] = in_strides[order[i]];
    }

    const auto n = x.numel();
    auto src = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        (*src)[flat] = offset;
        for (std::size_t ax = rank; ax-- > 0;) {
            if (++idx[ax] < out_shape[ax]) {
                offset += step[ax];
                break;
            }
            offset -= step[ax] * (out_shape[ax] - 1);
            idx[ax] = 0;
        }
    }

    auto in = x.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = in[(*src)[i]];
    return make_op(std::move(out_shape), std::move(out), {x}, [src](Node& self) {
        auto* g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*src)[i]] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis)
{
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const auto& first = parts.front().shape();
    if (axis >= first.size())
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(first));

    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
        out_shape[axis] += s[axis];
        widths.push_back(s[axis]);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    const auto total = out_shape[axis];

    std::vector<double> out(shape_numel(out_shape));
    std::size_t start = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto d = parts[k].data();
        const auto block = widths[k] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(d.begin() + o * block, block, out.begin() + (o * total + start) * inner);
        start += widths[k];
    }
    return make_op(std::move(out_shape), std::move(out), parts, [widths, outer, inner, total](Node& self) {
        std::size_t start = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            const auto block = widths[k] * inner;
            if (auto* g = grad_of(self, k))
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = self.grad.data() + (o * total + start) * inner;
                    for (std::size_t i = 0; i < block; ++i) g[o * block + i] += src[i];
                }
            start += widths[k];
        }
    });
}

Tensor index_select(const Tensor& x, std::span<const std::size_t> indices)
{
    if (x.rank() < 1 || indices.empty()) throw DimensionError("index_select: empty selection");
    const auto rows = x.dim(0);
    const auto row = x.numel() / rows;
    for (auto i : indices)
        if (i >= rows)
            throw DimensionError("index_select: index " + std::to_string(i) + " out of range for " +
                                 shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[0] = indices.size();
    auto in = x.data();
    std::vector<double> out(indices.size() * row);
    for (std::size_t k = 0; k < indices.size(); ++k)
        std::copy_n(in.begin() + indices[k] * row, row, out.begin() + k * row);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_op(std::move(out_shape), std::move(out), {x}, [idx, row](Node& self) {
        auto* g = grad_of(self, 0);
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t i = 0; i < row; ++i) g[idx[k] * row + i] += self.grad[k * row + i];
    });
}

Tensor crop(const Tensor& x, std::size_t row, std::size_t col, std::size_t height, std::size_t width)
{
    require_rank(x, 4, "crop");
    const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (height == 0 || width == 0 || row + height > H || col + width > W)
        throw ContractError("crop: window (row " + std::to_string(row) + ", col " + std::to_string(col) + ", " +
                            std::to_string(height) + "x" + std::to_string(width) + ") outside image " +
                            std::to_string(H) + "x" + std::to_string(W));
    auto in = x.data();
    std::vector<double> out(B * C * height * width);
    for (std::size_t bc = 0; bc < B * C; ++bc)
        for (std::size_t r = 0; r < height; ++r)
            std::copy_n(in.begin() + (bc * H + row + r) * W + col, width, out.begin() + (bc * height + r) * width);
    return make_op({B, C, height, width}, std::move(out), {x}, [=](Node& self) {
        auto* g = grad_of(self, 0);
        for (std::size_t bc = 0; bc < B * C; ++bc)
            for (std::size_t r = 0; r < height; ++r)
                for (std::size_t c = 0; c < width; ++c)
                    g[(bc * H + row + r) * W + col + c] += self.grad[(bc * height + r) * width + c];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n);
    MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        ConstMap g(self.grad.data(), m, n);
        if (auto* ga = grad_of(self, 0)) MutMap(ga, m, k).noalias() += g * ConstMap(data_of(self, 1), k, n).transpose();
        if (auto* gb = grad_of(self, 1)) MutMap(gb, k, n).noalias() += ConstMap(data_of(self, 0), m, k).transpose() * g;
    });
}

Tensor bmm(const Tensor& a, const Tensor& b)
{
    require_rank(a, 3, "bmm");
    require_rank(b, 3, "bmm");
    const auto B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    if (b.dim(0) != B || b.dim(1) != k)
        throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(B * m * n);
    auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < B; ++i)
        MutMap(out.data() + i * m * n, m, n).noalias() =
            ConstMap(ad.data() + i * m * k, m, k) * ConstMap(bd.data() + i * k * n, k, n);
    return make_op({B, m, n}, std::move(out), {a, b}, [B, m, k, n](Node& self) {
        auto* ga = grad_of(self, 0);
        auto* gb = grad_of(self, 1);
        const auto* ad = data_of(self, 0);
        const auto* bd = data_of(self, 1);
        for (std::size_t i = 0; i < B; ++i) {
            ConstMap g(self.grad.data() + i * m * n, m, n);
            if (ga) MutMap(ga + i * m * k, m, k).noalias() += g * ConstMap(bd + i * k * n, k, n).transpose();
            if (gb) MutMap(gb + i * k * n, k, n).noalias() += ConstMap(ad + i * m * k, m, k).transpose() * g;
        }
    });
}

Tensor softmax(const Tensor& x, std::size_t axis)
{
    const auto& s = x.shape();
    if (axis >= s.size())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    const auto len = s[axis];
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < inner; ++j) {
            const auto base = o * len * inner + j;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, in[base + t * inner]);
            double total = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const double e = std::exp(in[base + t * inner] - mx);
                out[base + t * inner] = e;
                total += e;
            }
            for (std::size_t t = 0; t < len; ++t) out[base + t * inner] /= total;
        }
    return make_op(s, std::move(out), {x}, [outer, inner, len](Node& self) {
        auto* g = grad_of(self, 0);
        const auto& y = self.data;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < inner; ++j) {
                const auto base = o * len * inner + j;
                double dot = 0.0;
                for (std::size_t t = 0; t < len; ++t) dot += self.grad[base + t * inner] * y[base + t * inner];
                for (std::size_t t = 0; t < len; ++t) {
                    const auto i = base + t * inner;
                    g[i] += y[i] * (self.grad[i] - dot);
                }
            }
    });
}

namespace {

void im2col(const double* x, std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t pad,
            std::size_t Ho, std::size_t Wo, double* col)
{
    const auto P = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* dst = col + ((c * k + ki) * k + kj) * P;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh + ki) - static_cast<std::ptrdiff_t>(pad);
                    double* row = dst + oh * Wo;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) {
                        std::fill_n(row, Wo, 0.0);
                        continue;
                    }
                    const double* src = x + (c * H + static_cast<std::size_t>(ih)) * W;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow + kj) - static_cast<std::ptrdiff_t>(pad);
                        row[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) ? 0.0 : src[iw];
                    }
                }
            }
}

void col2im_add(const double* col, std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t pad,
                std::size_t Ho, std::size_t Wo, double* x)
{
    const auto P = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* src = col + ((c * k + ki) * k + kj) * P;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh + ki) - static_cast<std::ptrdiff_t>(pad);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                    double* dst = x + (c * H + static_cast<std::size_t>(ih)) * W;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow + kj) - static_cast<std::ptrdiff_t>(pad);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(W)) dst[iw] += src[oh * Wo + ow];
                    }
                }
            }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t padding)
{
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto O = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != C)
        throw DimensionError("conv2d: input has " + std::to_string(C) + " channels, weight " +
                             shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
    if (weight.dim(3) != k) throw DimensionError("conv2d: non-square kernel " + shape_str(weight.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O))
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " + std::to_string(O) + " outputs");
    if (H + 2 * padding < k || W + 2 * padding < k)
        throw DimensionError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(k) +
                             " with padding " + std::to_string(padding));
    const auto Ho = H + 2 * padding - k + 1, Wo = W + 2 * padding - k + 1;
    const auto K = C * k * k, P = Ho * Wo;
    const bool direct = (k == 1 && padding == 0);

    std::vector<double> out(B * O * P);
    std::vector<double> col(direct ? 0 : K * P);
    ConstMap wm(weight.data().data(), O, K);
    auto xd = x.data();
    for (std::size_t b = 0; b < B; ++b) {
        const double* xb = xd.data() + b * C * H * W;
        if (!direct) im2col(xb, C, H, W, k, padding, Ho, Wo, col.data());
        MutMap ob(out.data() + b * O * P, O, P);
        ob.noalias() = wm * ConstMap(direct ? xb : col.data(), K, P);
        if (bias.defined())
            for (std::size_t o = 0; o < O; ++o) ob.row(o).array() += bias.data()[o];
    }

    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    const bool has_bias = bias.defined();
    return make_op({B, O, Ho, Wo}, std::move(out), parents, [=](Node& self) {
        auto* gx = grad_of(self, 0);
        auto* gw = grad_of(self, 1);
        auto* gb = has_bias ? grad_of(self, 2) : nullptr;
        const double* xd = data_of(self, 0);
        ConstMap wm(data_of(self, 1), O, K);
        std::vector<double> col(direct ? 0 : K * P);
        std::vector<double> dcol(gx && !direct ? K * P : 0);
        for (std::size_t b = 0; b < B; ++b) {
            ConstMap g(self.grad.data() + b * O * P, O, P);
            const double* xb = xd + b * C * H * W;
            if (gw) {
                if (!direct) im2col(xb, C, H, W, k, padding, Ho, Wo, col.data());
                MutMap(gw, O, K).noalias() += g * ConstMap(direct ? xb : col.data(), K, P).transpose();
            }
            if (gb)
                for (std::size_t o = 0; o < O; ++o) gb[o] += g.row(o).sum();
            if (gx) {
                double* gxb = gx + b * C * H * W;
                if (direct) {
                    MutMap(gxb, K, P).noalias() += wm.transpose() * g;
                } else {
                    MutMap(dcol.data(), K, P).noalias() = wm.transpose() * g;
                    col2im_add(dcol.data(), C, H, W, k, padding, Ho, Wo, gxb);
                }
            }
        }
    });
}

Tensor maxpool2(const Tensor& x)
{
    require_rank(x, 4, "maxpool2");
    const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H < 2 || W < 2) throw DimensionError("maxpool2: spatial size too small in " + shape_str(x.shape()));
    const auto Ho = H / 2, Wo = W / 2;
    auto in = x.data();
    std::vector<double> out(B * C * Ho * Wo);
    auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
    for (std::size_t bc = 0; bc < B * C; ++bc)
        for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j) {
                std::size_t best = (bc * H + 2 * i) * W + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const auto idx = (bc * H + 2 * i + di) * W + 2 * j + dj;
                        if (in[idx] > in[best]) best = idx;
                    }
                const auto o = (bc * Ho + i) * Wo + j;
                out[o] = in[best];
                (*arg)[o] = best;
            }
    return make_op({B, C, Ho, Wo}, std::move(out), {x}, [arg](Node& self) {
        auto* g = grad_of(self, 0);
        for (std::size_t o = 0; o < self.grad.size(); ++o) g[(*arg)[o]] += self.grad[o];
    });
}

Tensor avgpool_global(const Tensor& x)
{
    require_rank(x, 4, "avgpool_global");
    const auto B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
    auto in = x.data();
    std::vector<double> out(B * C);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += in[bc * P + p];
        out[bc] = s / static_cast<double>(P);
    }
    return make_op({B, C}, std::move(out), {x}, [P](Node& self) {
        auto* g = grad_of(self, 0);
        const double inv = 1.0 / static_cast<double>(P);
        for (std::size_t bc = 0; bc < self.grad.size(); ++bc)
            for (std::size_t p = 0; p < P; ++p) g[bc * P + p] += self.grad[bc] * inv;
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const auto B = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    if (weight.dim(1) != in)
        throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim))
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " for weight " + shape_str(weight.shape()));
    std::vector<double> out(B * out_dim);
    MutMap om(out.data(), B, out_dim);
    om.noalias() = ConstMap(x.data().data(), B, in) * ConstMap(weight.data().data(), out_dim, in).transpose();
    if (bias.defined())
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < out_dim; ++o) om(b, o) += bias.data()[o];

    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    const bool has_bias = bias.defined();
    return make_op({B, out_dim}, std::move(out), parents, [=](Node& self) {
        ConstMap g(self.grad.data(), B, out_dim);
        if (auto* gx = grad_of(self, 0)) MutMap(gx, B, in).noalias() += g * ConstMap(data_of(self, 1), out_dim, in);
        if (auto* gw = grad_of(self, 1))
            MutMap(gw, out_dim, in).noalias() += g.transpose() * ConstMap(data_of(self, 0), B, in);
        if (has_bias)
            if (auto* gb = grad_of(self, 2))
                for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g.col(o).sum();
    });
}

namespace {

void check_bn_params(const Tensor& x, const Tensor& gamma, const Tensor& beta)
{
    require_rank(x, 4, "batch_norm");
    const auto C = x.dim(1);
    if (gamma.numel() != C || beta.numel() != C)
        throw DimensionError("batch_norm: input " + shape_str(x.shape()) + " with parameters " +
                             shape_str(gamma.shape()) + "/" + shape_str(beta.shape()));
}

} // namespace

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, BatchStats* stats)
{
    check_bn_params(x, gamma, beta);
    const auto B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
    const auto M = B * P;
    auto in = x.data();
    auto gd = gamma.data(), bd = beta.data();

    auto xhat = std::make_shared<std::vector<double>>(in.size());
    auto inv_std = std::make_shared<std::vector<double>>(C);
    std::vector<double> out(in.size());
    if (stats) {
        stats->mean.assign(C, 0.0);
        stats->variance.assign(C, 0.0);
        stats->count = M;
    }
    for (std::size_t c = 0; c < C; ++c) {
        double mu = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t p = 0; p < P; ++p) mu += in[(b * C + c) * P + p];
        mu /= static_cast<double>(M);
        double var = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t p = 0; p < P; ++p) {
                const double d = in[(b * C + c) * P + p] - mu;
                var += d * d;
            }
        var /= static_cast<double>(M);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[c] = is;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t p = 0; p < P; ++p) {
                const auto i = (b * C + c) * P + p;
                (*xhat)[i] = (in[i] - mu) * is;
                out[i] = gd[c] * (*xhat)[i] + bd[c];
            }
        if (stats) {
            stats->mean[c] = mu;
            stats->variance[c] = var;
        }
    }
    return make_op(x.shape(), std::move(out), {x, gamma, beta}, [=](Node& self) {
        auto* gx = grad_of(self, 0);
        auto* gg = grad_of(self, 1);
        auto* gbeta = grad_of(self, 2);
        const double* gam = data_of(self, 1);
        const auto& dy = self.grad;
        const auto& xh = *xhat;
        for (std::size_t c = 0; c < C; ++c) {
            double sdy = 0.0, sdyx = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t p = 0; p < P; ++p) {
                    const auto i = (b * C + c) * P + p;
                    sdy += dy[i];
                    sdyx += dy[i] * xh[i];
                }
            if (gg) gg[c] += sdyx;
            if (gbeta) gbeta[c] += sdy;
            if (gx) {
                const double k = gam[c] * (*inv_std)[c] / static_cast<double>(M);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t p = 0; p < P; ++p) {
                        const auto i = (b * C + c) * P + p;
                        gx[i] += k * (static_cast<double>(M) * dy[i] - sdy - xh[i] * sdyx);
                    }
            }
        }
    });
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       std::span<const double> running_mean, std::span<const double> running_var, double eps)
{
    check_bn_params(x, gamma, beta);
    const auto B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
    if (running_mean.size() != C || running_var.size() != C)
        throw DimensionError("batch_norm: running statistics do not match " + shape_str(x.shape()));
    std::vector<double> mu(running_mean.begin(), running_mean.end());
    std::vector<double> is(C);
    for (std::size_t c = 0; c < C; ++c) is[c] = 1.0 / std::sqrt(running_var[c] + eps);
    auto in = x.data();
    auto gd = gamma.data(), bd = beta.data();
    std::vector<double> out(in.size());
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < P; ++p) {
                const auto i = (b * C + c) * P + p;
                out[i] = gd[c] * (in[i] - mu[c]) * is[c] + bd[c];
            }
    return make_op(x.shape(), std::move(out), {x, gamma, beta}, [=](Node& self) {
        auto* gx = grad_of(self, 0);
        auto* gg = grad_of(self, 1);
        auto* gbeta = grad_of(self, 2);
        const double* xd = data_of(self, 0);
        const double* gam = data_of(self, 1);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t p = 0; p < P; ++p) {
                    const auto i = (b * C + c) * P + p;
                    const double dy = self.grad[i];
                    const double xh = (xd[i] - mu[c]) * is[c];
                    if (gx) gx[i] += dy * gam[c] * is[c];
                    if (gg) gg[c] += dy * xh;
                    if (gbeta) gbeta[c] += dy;
                }
    });
}

} // namespace glt

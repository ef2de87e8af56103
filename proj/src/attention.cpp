#include "glt/attention.hpp"

#include <cmath>
#include <ostream>

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

double GlaConfig::score_scale() const
{
    const auto d = scaling == AttentionScaling::per_head ? head_dim() : d_model;
    return 1.0 / std::sqrt(static_cast<double>(d));
}

void GlaConfig::validate() const
{
    if (d_model == 0 || heads == 0) throw ContractError("GlaConfig: d_model and heads must be positive");
    if (d_model % heads != 0)
        throw ContractError("GlaConfig: d_model " + std::to_string(d_model) + " not divisible by " +
                            std::to_string(heads) + " heads");
}

namespace {

// [B, N, d] -> [B*heads, N, dh]
Tensor split_heads(const Tensor& x, std::size_t heads)
{
    const auto B = x.dim(0), N = x.dim(1), dh = x.dim(2) / heads;
    static constexpr std::size_t order[] = {0, 2, 1, 3};
    return reshape(permute(reshape(x, {B, N, heads, dh}), order), {B * heads, N, dh});
}

// [B, N, d] -> [B*heads, dh, N]
Tensor split_heads_transposed(const Tensor& x, std::size_t heads)
{
    const auto B = x.dim(0), N = x.dim(1), dh = x.dim(2) / heads;
    static constexpr std::size_t order[] = {0, 2, 3, 1};
    return reshape(permute(reshape(x, {B, N, heads, dh}), order), {B * heads, dh, N});
}

// [B*heads, N, dh] -> [B, N, d]
Tensor merge_heads(const Tensor& x, std::size_t batch, std::size_t heads)
{
    const auto N = x.dim(1), dh = x.dim(2);
    static constexpr std::size_t order[] = {0, 2, 1, 3};
    return reshape(permute(reshape(x, {batch, heads, N, dh}), order), {batch, N, heads * dh});
}

} // namespace

AttentionOutput multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                     const GlaConfig& cfg)
{
    cfg.validate();
    const bool batched = queries.rank() == 3;
    if (queries.rank() != keys.rank() || keys.rank() != values.rank() || (queries.rank() != 2 && !batched))
        throw DimensionError("attention: expected matching rank-2 or rank-3 inputs, got " +
                             shape_str(queries.shape()) + ", " + shape_str(keys.shape()) + ", " +
                             shape_str(values.shape()));
    auto q = batched ? queries : reshape(queries, {1, queries.dim(0), queries.dim(1)});
    auto k = batched ? keys : reshape(keys, {1, keys.dim(0), keys.dim(1)});
    auto v = batched ? values : reshape(values, {1, values.dim(0), values.dim(1)});

    const auto B = q.dim(0), N2 = q.dim(1), N1 = k.dim(1), d = cfg.d_model;
    if (q.dim(2) != d || k.dim(2) != d || v.dim(2) != d)
        throw DimensionError("attention: channel count must be " + std::to_string(d) + ", got " +
                             shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
    if (k.dim(0) != B || v.dim(0) != B)
        throw DimensionError("attention: batch sizes differ, " + shape_str(q.shape()) + " vs " + shape_str(k.shape()));
    if (v.dim(1) != N1)
        throw DimensionError("attention: keys " + shape_str(k.shape()) + " and values " + shape_str(v.shape()) +
                             " have different position counts");
    if (N1 == 0) throw ContractError("attention: no key positions to attend over");

    const auto h = cfg.heads;
    auto scores = scale(bmm(split_heads(q, h), split_heads_transposed(k, h)), cfg.score_scale());
    auto attn = softmax(scores, 2); // [B*h, N2, N1]
    auto context = merge_heads(bmm(attn, split_heads(v, h)), B, h);

    AttentionOutput out;
    if (batched) {
        out.context = context;
        out.weights = reshape(attn, {B, h, N2, N1});
    } else {
        out.context = reshape(context, {N2, d});
        out.weights = reshape(attn, {h, N2, N1});
    }
    return out;
}

Tensor flatten_positions(const Tensor& feature)
{
    if (feature.rank() != 4) throw DimensionError("flatten_positions: expected [B, d, h, w], got " + shape_str(feature.shape()));
    const auto B = feature.dim(0), d = feature.dim(1), N = feature.dim(2) * feature.dim(3);
    static constexpr std::size_t order[] = {0, 2, 1};
    return permute(reshape(feature, {B, d, N}), order);
}

Tensor unflatten_positions(const Tensor& rows, std::size_t height, std::size_t width)
{
    if (rows.rank() != 3 || rows.dim(1) != height * width)
        throw DimensionError("unflatten_positions: " + shape_str(rows.shape()) + " cannot fill " +
                             std::to_string(height) + "x" + std::to_string(width));
    const auto B = rows.dim(0), d = rows.dim(2);
    static constexpr std::size_t order[] = {0, 2, 1};
    return reshape(permute(rows, order), {B, d, height, width});
}

GlobalLocalAttention::GlobalLocalAttention(GlaConfig cfg, Rng& rng) : cfg_(cfg)
{
    cfg_.validate();
    const auto d = cfg_.d_model;
    query = Conv2d(d, d, 1, 0, rng);
    key = Conv2d(d, d, 1, 0, rng);
    value = Conv2d(d, d, 1, 0, rng);
    output = Conv2d(d, d, 1, 0, rng);
}

GlobalLocalAttention::Projected GlobalLocalAttention::project_qkv(const Tensor& f_local, const Tensor& f_global) const
{
    if (f_local.rank() != 4 || f_global.rank() != 4 || f_local.dim(1) != cfg_.d_model ||
        f_global.dim(1) != cfg_.d_model)
        throw DimensionError("global-local attention: both features need " + std::to_string(cfg_.d_model) +
                             " channels, got local " + shape_str(f_local.shape()) + " and global " +
                             shape_str(f_global.shape()));
    if (f_local.dim(0) != f_global.dim(0))
        throw DimensionError("global-local attention: batch sizes differ, local " + shape_str(f_local.shape()) +
                             " vs global " + shape_str(f_global.shape()));
    return {flatten_positions(query.forward(f_local)), flatten_positions(key.forward(f_global)),
            flatten_positions(value.forward(f_global))};
}

AttentionOutput GlobalLocalAttention::attend(const Projected& p) const
{
    auto out = multi_head_attention(p.query, p.key, p.value, cfg_);
    const auto B = out.context.dim(0), N2 = out.context.dim(1), d = cfg_.d_model;
    auto w = reshape(output.weight, {d, d});
    out.context = reshape(linear(reshape(out.context, {B * N2, d}), w, output.bias), {B, N2, d});
    return out;
}

Tensor GlobalLocalAttention::forward(const Tensor& f_local, const Tensor& f_global, Tensor* weights) const
{
    auto out = attend(project_qkv(f_local, f_global));
    if (weights) *weights = out.weights;
    return unflatten_positions(out.context, f_local.dim(2), f_local.dim(3));
}

void GlobalLocalAttention::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    query.collect(prefix + ".query", params);
    key.collect(prefix + ".key", params);
    value.collect(prefix + ".value", params);
    output.collect(prefix + ".output", params);
}

void write_attention_csv(std::ostream& os, const Tensor& weights)
{
    auto w = weights;
    if (w.rank() == 4 && w.dim(0) == 1) w = reshape(w.detach(), {w.dim(1), w.dim(2), w.dim(3)});
    if (w.rank() != 3) throw DimensionError("attention trace must be [heads, N2, N1], got " + shape_str(weights.shape()));
    const auto H = w.dim(0), N2 = w.dim(1), N1 = w.dim(2);
    auto d = w.data();
    const auto old = os.precision(17);
    os << "head,query_index,key_index,weight\n";
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < N2; ++i)
            for (std::size_t j = 0; j < N1; ++j) os << h << ',' << i << ',' << j << ',' << d[(h * N2 + i) * N1 + j] << '\n';
    os.precision(old);
}

} // namespace glt

#pragma once

#include <iosfwd>

#include "glt/layers.hpp"

namespace glt {

enum class AttentionScaling {
    per_head,    // divide scores by sqrt(d_model / heads)
    whole_model, // divide scores by sqrt(d_model)
};

struct GlaConfig {
    std::size_t d_model = 512;
    std::size_t heads = 8;
    AttentionScaling scaling = AttentionScaling::per_head;

    std::size_t head_dim() const { return d_model / heads; }
    double score_scale() const;
    void validate() const;
};

struct AttentionOutput {
    Tensor context; // same shape as the queries
    Tensor weights; // [heads, N2, N1], or [B, heads, N2, N1] for batched input
};

/// Multi-head scaled dot-product attention of queries over keys/values with no
/// positional terms: per head, softmax(Q K^T * score_scale) V, heads
/// concatenated back on the channel axis.
///
/// Accepts Q [N2, d], K/V [N1, d], or the batched forms [B, N2, d] / [B, N1, d].
/// N2 and N1 are independent.
AttentionOutput multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                     const GlaConfig& cfg);

// [B, d, h, w] -> [B, h*w, d], positions in row-major order
Tensor flatten_positions(const Tensor& feature);
// inverse of flatten_positions
Tensor unflatten_positions(const Tensor& rows, std::size_t height, std::size_t width);

/// Cross-attention from a local feature map (queries) onto a global feature map
/// (keys and values), with 1x1 projections in and out.
class GlobalLocalAttention {
public:
    GlobalLocalAttention() = default;
    GlobalLocalAttention(GlaConfig cfg, Rng& rng);

    struct Projected {
        Tensor query; // [B, N2, d]
        Tensor key;   // [B, N1, d]
        Tensor value; // [B, N1, d]
    };

    Projected project_qkv(const Tensor& f_local, const Tensor& f_global) const;
    // Attention plus the output projection; context is [B, N2, d].
    AttentionOutput attend(const Projected& p) const;
    // [B, d, h', w'] local, [B, d, h, w] global -> [B, d, h', w']
    Tensor forward(const Tensor& f_local, const Tensor& f_global, Tensor* weights = nullptr) const;

    const GlaConfig& config() const { return cfg_; }

    Conv2d query, key, value, output;

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;

private:
    GlaConfig cfg_;
};

// CSV rows "head,query_index,key_index,weight" for a [heads, N2, N1] (or [1, heads, N2, N1]) tensor.
void write_attention_csv(std::ostream& os, const Tensor& weights);

} // namespace glt

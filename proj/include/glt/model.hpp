#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "glt/attention.hpp"
#include "glt/backbone.hpp"
#include "glt/patch.hpp"

namespace glt {

enum class ModelMode {
    full,       // global and local pathways fused by global-local transformer blocks
    local_only, // local pathway alone (BagNet-style patch baseline)
};

struct ModelConfig {
    BackboneConfig backbone;
    GlaConfig attention;
    std::size_t blocks = 6;
    ModelMode mode = ModelMode::full;
    // When false, the blocks see a detached global feature, so only the global
    // head trains the global backbone.
    bool global_grad_through_blocks = true;

    // Widths used in the reference architecture: [64,128,256,512], d=512, h=8, N=6.
    static ModelConfig paper_scale();
    // Narrow network for CPU runs: [8,16,32,64], d=64, h=4, N=2.
    static ModelConfig desk_scale();
    void validate() const;
};

/// attention -> concat(context, local) -> two 1x1 conv blocks -> residual add
class GltBlock {
public:
    GltBlock() = default;
    GltBlock(const GlaConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& f_local, const Tensor& f_global, Mode mode, Tensor* weights = nullptr);

    GlobalLocalAttention attention;
    ConvBlock feed_forward1; // 2d -> d
    ConvBlock feed_forward2; // d -> d

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;
};

/// Output of the global pathway for a batch of whole images, shared by every
/// patch cropped from those images.
struct GlobalContext {
    Tensor features; // [B, d, h, w]
    Tensor age;      // [B]
};

class GltModel {
public:
    GltModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    bool local_only() const { return cfg_.mode == ModelMode::local_only; }

    void set_mode(Mode mode) { mode_ = mode; }
    Mode mode() const { return mode_; }

    // Ages are read out as offset + scale * head(x). Identity by default.
    void set_target_normalization(double offset, double scale);
    double target_offset() const { return norm_.data()[0]; }
    double target_scale() const { return norm_.data()[1]; }

    // images [B, K, H, W]
    GlobalContext encode_global(const Tensor& images);

    /// Local-pathway ages for patches [P, K, s, s]. owner[i] names the image in
    /// ctx whose global feature patch i attends to. ctx is ignored in local_only mode.
    Tensor predict_local(const Tensor& patches, const GlobalContext* ctx, std::span<const std::size_t> owner);

    // Per-block features, for inspection and tests.
    std::vector<Tensor> local_trace(const Tensor& patches, const GlobalContext* ctx,
                                    std::span<const std::size_t> owner, std::vector<Tensor>* attention = nullptr);

    struct Prediction {
        std::optional<double> age_global; // absent in local_only mode
        double age_local = 0.0;
    };
    // image [K, H, W] or [1, K, H, W]
    Prediction forward(const Tensor& image, const PatchSpec& patch);

    std::vector<NamedTensor> parameters() const;
    // parameters, batch-norm running statistics and the target normalisation
    std::vector<NamedTensor> state() const;

    Backbone global_backbone;
    Backbone local_backbone;
    std::vector<GltBlock> blocks;
    Linear global_head;
    Linear local_head;

private:
    Tensor head(const Linear& layer, const Tensor& feature) const;

    ModelConfig cfg_;
    Mode mode_ = Mode::train;
    Tensor norm_; // [offset, scale]
};

// [B, K, H, W] -> [P, K, s, s], one crop per patch; every patch must share one size.
Tensor crop_patches(const Tensor& images, std::span<const PatchSpec> patches, std::span<const std::size_t> owner);

/// Sum of the mean absolute errors of both pathways. pred_global may be
/// undefined (local_only mode), in which case only the local term is used.
Tensor training_loss(const Tensor& pred_global, std::span<const double> target_global, const Tensor& pred_local,
                     std::span<const double> target_local);

Tensor mae_loss(const Tensor& pred, std::span<const double> target);

} // namespace glt

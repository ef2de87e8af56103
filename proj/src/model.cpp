#include "glt/model.hpp"

#include <cmath>

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

ModelConfig ModelConfig::paper_scale()
{
    return ModelConfig{};
}

ModelConfig ModelConfig::desk_scale()
{
    ModelConfig cfg;
    cfg.backbone.stage_channels = {8, 16, 32, 64};
    cfg.attention.d_model = 64;
    cfg.attention.heads = 4;
    cfg.blocks = 2;
    return cfg;
}

void ModelConfig::validate() const
{
    backbone.validate();
    if (mode == ModelMode::full) {
        attention.validate();
        if (blocks == 0) throw ContractError("ModelConfig: at least one global-local block is required");
        if (attention.d_model != backbone.output_channels())
            throw ContractError("ModelConfig: attention width " + std::to_string(attention.d_model) +
                                " differs from backbone output " + std::to_string(backbone.output_channels()));
    }
}

GltBlock::GltBlock(const GlaConfig& cfg, Rng& rng)
    : attention(cfg, rng), feed_forward1(2 * cfg.d_model, cfg.d_model, 1, 0, rng),
      feed_forward2(cfg.d_model, cfg.d_model, 1, 0, rng)
{
}

Tensor GltBlock::forward(const Tensor& f_local, const Tensor& f_global, Mode mode, Tensor* weights)
{
    auto context = attention.forward(f_local, f_global, weights);
    auto fused = feed_forward2.forward(feed_forward1.forward(concat({context, f_local}, 1), mode), mode);
    return add(f_local, fused);
}

void GltBlock::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    attention.collect(prefix + ".attention", params);
    feed_forward1.collect(prefix + ".ff1", params);
    feed_forward2.collect(prefix + ".ff2", params);
}

void GltBlock::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const
{
    feed_forward1.collect_buffers(prefix + ".ff1", buffers);
    feed_forward2.collect_buffers(prefix + ".ff2", buffers);
}

namespace {

// Independent stream per component so the local pathway is initialised the
// same way in both model modes.
Rng component_rng(std::uint64_t seed, std::uint64_t component)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(component)};
    return Rng(seq);
}

} // namespace

GltModel::GltModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), norm_(Tensor::from_data({2}, {0.0, 1.0}))
{
    cfg_.validate();
    const auto d = cfg_.backbone.output_channels();
    auto local_rng = component_rng(seed, 1);
    local_backbone = Backbone(cfg_.backbone, local_rng);
    local_head = Linear(d, 1, local_rng);
    if (cfg_.mode == ModelMode::full) {
        auto global_rng = component_rng(seed, 2);
        global_backbone = Backbone(cfg_.backbone, global_rng);
        global_head = Linear(d, 1, global_rng);
        auto block_rng = component_rng(seed, 3);
        for (std::size_t i = 0; i < cfg_.blocks; ++i) blocks.emplace_back(cfg_.attention, block_rng);
    }
}

void GltModel::set_target_normalization(double offset, double scale)
{
    if (!std::isfinite(offset) || !std::isfinite(scale) || scale <= 0.0)
        throw ContractError("target normalisation needs a finite offset and positive scale");
    auto n = norm_.mutable_data();
    n[0] = offset;
    n[1] = scale;
}

Tensor GltModel::head(const Linear& layer, const Tensor& feature) const
{
    auto raw = layer.forward(avgpool_global(feature));
    raw = reshape(raw, {raw.dim(0)});
    return add_scalar(scale(raw, target_scale()), target_offset());
}

GlobalContext GltModel::encode_global(const Tensor& images)
{
    if (local_only()) throw ContractError("local_only model has no global pathway");
    GlobalContext ctx;
    ctx.features = global_backbone.forward(images, mode_);
    ctx.age = head(global_head, ctx.features);
    return ctx;
}

std::vector<Tensor> GltModel::local_trace(const Tensor& patches, const GlobalContext* ctx,
                                          std::span<const std::size_t> owner, std::vector<Tensor>* attention)
{
    std::vector<Tensor> trace;
    auto f_local = local_backbone.forward(patches, mode_);
    trace.push_back(f_local);
    if (local_only()) return trace;

    if (!ctx || !ctx->features.defined()) throw ContractError("full model needs the global context");
    if (owner.size() != patches.dim(0))
        throw DimensionError("predict_local: " + std::to_string(owner.size()) + " owners for " +
                             std::to_string(patches.dim(0)) + " patches");
    auto f_global = cfg_.global_grad_through_blocks ? ctx->features : ctx->features.detach();
    f_global = index_select(f_global, owner);
    for (auto& block : blocks) {
        Tensor w;
        f_local = block.forward(f_local, f_global, mode_, attention ? &w : nullptr);
        if (attention) attention->push_back(w);
        trace.push_back(f_local);
    }
    return trace;
}

Tensor GltModel::predict_local(const Tensor& patches, const GlobalContext* ctx, std::span<const std::size_t> owner)
{
    return head(local_head, local_trace(patches, ctx, owner).back());
}

GltModel::Prediction GltModel::forward(const Tensor& image, const PatchSpec& patch)
{
    auto batch = image.rank() == 3 ? reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)}) : image;
    if (batch.rank() != 4 || batch.dim(0) != 1)
        throw DimensionError("model forward: expected one [K, H, W] image, got " + shape_str(image.shape()));
    require_inside(patch, batch.dim(2), batch.dim(3));
    const std::size_t owner[] = {0};
    const PatchSpec patches[] = {patch};
    auto crops = crop_patches(batch, patches, owner);

    Prediction p;
    if (local_only()) {
        p.age_local = predict_local(crops, nullptr, owner).item();
    } else {
        auto ctx = encode_global(batch);
        p.age_global = ctx.age.item();
        p.age_local = predict_local(crops, &ctx, owner).item();
    }
    return p;
}

std::vector<NamedTensor> GltModel::parameters() const
{
    std::vector<NamedTensor> params;
    local_backbone.collect("local_backbone", params);
    local_head.collect("local_head", params);
    if (!local_only()) {
        global_backbone.collect("global_backbone", params);
        global_head.collect("global_head", params);
        for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("block" + std::to_string(i), params);
    }
    return params;
}

std::vector<NamedTensor> GltModel::state() const
{
    auto all = parameters();
    local_backbone.collect_buffers("local_backbone", all);
    if (!local_only()) {
        global_backbone.collect_buffers("global_backbone", all);
        for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect_buffers("block" + std::to_string(i), all);
    }
    all.push_back({"target_normalization", norm_});
    return all;
}

Tensor crop_patches(const Tensor& images, std::span<const PatchSpec> patches, std::span<const std::size_t> owner)
{
    if (images.rank() != 4) throw DimensionError("crop_patches: expected [B, K, H, W], got " + shape_str(images.shape()));
    if (patches.empty() || patches.size() != owner.size())
        throw DimensionError("crop_patches: need one owner per patch");
    const auto B = images.dim(0), K = images.dim(1), H = images.dim(2), W = images.dim(3);
    const auto s = patches.front().size;
    std::vector<double> out(patches.size() * K * s * s);
    auto in = images.data();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& p = patches[i];
        if (p.size != s) throw DimensionError("crop_patches: mixed patch sizes in one batch");
        if (owner[i] >= B) throw DimensionError("crop_patches: owner index out of range");
        require_inside(p, H, W);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t r = 0; r < s; ++r)
                std::copy_n(in.begin() + ((owner[i] * K + k) * H + p.row + r) * W + p.col, s,
                            out.begin() + ((i * K + k) * s + r) * s);
    }
    return Tensor::from_data({patches.size(), K, s, s}, std::move(out));
}

Tensor mae_loss(const Tensor& pred, std::span<const double> target)
{
    if (pred.numel() != target.size() || target.empty())
        throw DimensionError("mae_loss: " + std::to_string(pred.numel()) + " predictions for " +
                             std::to_string(target.size()) + " targets");
    for (double v : pred.data())
        if (!std::isfinite(v)) throw NumericalError("mae_loss: non-finite prediction");
    for (double v : target)
        if (!std::isfinite(v)) throw NumericalError("mae_loss: non-finite target");
    auto t = Tensor::from_data(pred.shape(), std::vector<double>(target.begin(), target.end()));
    return mean(abs(sub(pred, t)));
}

Tensor training_loss(const Tensor& pred_global, std::span<const double> target_global, const Tensor& pred_local,
                     std::span<const double> target_local)
{
    auto loss = mae_loss(pred_local, target_local);
    if (pred_global.defined()) loss = add(mae_loss(pred_global, target_global), loss);
    return loss;
}

} // namespace glt

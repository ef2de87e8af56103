#include "glt/backbone.hpp"

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

void BackboneConfig::validate() const
{
    if (stage_channels.empty() || blocks_per_stage == 0 || input_channels == 0)
        throw ContractError("BackboneConfig: stages, blocks per stage and input channels must be positive");
    for (auto c : stage_channels)
        if (c == 0) throw ContractError("BackboneConfig: zero-width stage");
}

Backbone::Backbone(BackboneConfig cfg, Rng& rng) : cfg_(std::move(cfg))
{
    cfg_.validate();
    auto in = cfg_.input_channels;
    for (auto out : cfg_.stage_channels)
        for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) {
            blocks_.emplace_back(in, out, 3, 1, rng);
            in = out;
        }
}

Shape Backbone::output_shape(const BackboneConfig& cfg, const Shape& input)
{
    if (input.size() != 4 || input[1] != cfg.input_channels)
        throw DimensionError("backbone: expected [B, " + std::to_string(cfg.input_channels) + ", H, W], got " +
                             shape_str(input));
    const auto f = cfg.downsampling();
    if (input[2] < f || input[3] < f)
        throw DimensionError("backbone: input " + shape_str(input) + " smaller than " + std::to_string(f) + "x" +
                             std::to_string(f));
    auto h = input[2], w = input[3];
    for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
        h /= 2;
        w /= 2;
    }
    return {input[0], cfg.output_channels(), h, w};
}

Tensor Backbone::forward(const Tensor& x, Mode mode)
{
    output_shape(cfg_, x.shape());
    auto y = x;
    std::size_t i = 0;
    for (std::size_t s = 0; s < cfg_.stage_channels.size(); ++s) {
        for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) y = blocks_[i++].forward(y, mode);
        y = maxpool2(y);
    }
    return y;
}

void Backbone::collect(const std::string& prefix, std::vector<NamedTensor>& params) const
{
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), params);
}

void Backbone::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const
{
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].collect_buffers(prefix + ".block" + std::to_string(i), buffers);
}

} // namespace glt

#pragma once

#include <vector>

#include "glt/layers.hpp"

namespace glt {

struct BackboneConfig {
    std::vector<std::size_t> stage_channels{64, 128, 256, 512};
    std::size_t blocks_per_stage = 2;
    std::size_t input_channels = 5;

    std::size_t output_channels() const { return stage_channels.back(); }
    // Each stage ends with a 2x2 max-pool.
    std::size_t downsampling() const { return std::size_t{1} << stage_channels.size(); }
    void validate() const;
};

/// VGG-style feature extractor: per stage, blocks_per_stage conv3x3(pad 1) ->
/// batchnorm -> relu blocks followed by a 2x2 max-pool.
class Backbone {
public:
    Backbone() = default;
    Backbone(BackboneConfig cfg, Rng& rng);

    // [B, K, H, W] -> [B, C_out, H / 2^stages, W / 2^stages] (floor at every pool)
    Tensor forward(const Tensor& x, Mode mode);

    const BackboneConfig& config() const { return cfg_; }
    static Shape output_shape(const BackboneConfig& cfg, const Shape& input);

    void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;

    std::vector<ConvBlock>& blocks() { return blocks_; }

private:
    BackboneConfig cfg_;
    std::vector<ConvBlock> blocks_;
};

} // namespace glt

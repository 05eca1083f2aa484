#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cranial/autograd.hpp"

namespace cranial {

struct ModelConfig {
    int levels = 3;
    int base_channels = 8;
    int blocks_per_level = 1;
    int in_channels = 1;
    int out_channels = 1;

    void validate() const;
    /// Spatial dims must be divisible by this.
    std::int64_t spatial_divisor() const { return std::int64_t{1} << (levels - 1); }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct NamedParam {
    std::string name;
    Var var;
};

/// Residual 3-D encoder-decoder. Channels double per level from
/// base_channels. Encoder stage i runs its residual blocks, then (except at
/// the bottom) a stride-2 3^3 conv; the decoder mirrors it with nearest 2x
/// upsampling, a 3^3 conv, concatenation with the encoder skip, and residual
/// blocks. A 1^3 conv and a sigmoid produce per-voxel probabilities.
///
/// Residual block: y = lrelu(s(x) + conv_b(lrelu(conv_a(x)))), with s a 1^3
/// projection when channel counts differ and identity otherwise.
///
/// Parameter names follow construction order, e.g.
///   enc0.block0.conv_a.weight, enc0.down.bias, dec1.up.weight,
///   dec0.block0.proj.weight, head.weight
class MicroUNet {
public:
    MicroUNet(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<NamedParam>& parameters() { return params_; }
    std::int64_t parameter_count() const;

    /// x: (n, in_channels, d, h, w) with d, h, w divisible by spatial_divisor().
    Var forward(const Var& x) const;

    void zero_grad();

private:
    struct Conv {
        Var weight;
        Var bias;
        int stride = 1;
        int pad = 0;
    };
    struct Block {
        Conv conv_a, conv_b;
        bool has_proj = false;
        Conv proj;
    };
    struct Stage {
        std::vector<Block> blocks;
        bool has_down = false;
        Conv down;
    };
    struct UpStage {
        Conv up;
        std::vector<Block> blocks;
    };

    Conv make_conv(const std::string& name, std::int64_t in_c, std::int64_t out_c, int k, int stride, double bound_gain,
                   std::uint64_t seed);
    Block make_block(const std::string& name, std::int64_t in_c, std::int64_t out_c, std::uint64_t seed);
    Var apply(const Conv& c, const Var& x) const;
    Var apply(const Block& b, const Var& x) const;

    ModelConfig cfg_;
    std::vector<Stage> encoder_;
    std::vector<UpStage> decoder_;  // decoder_[i] restores level i
    Conv head_;
    std::vector<NamedParam> params_;
};

}  // namespace cranial

#include "cranial/model.hpp"

#include <cmath>

#include "cranial/error.hpp"
#include "cranial/rng.hpp"

namespace cranial {

void ModelConfig::validate() const {
    if (levels < 1) throw Error(ErrorKind::InvalidArgument, "model levels must be >= 1");
    if (base_channels < 1) throw Error(ErrorKind::InvalidArgument, "base_channels must be >= 1");
    if (blocks_per_level < 1) throw Error(ErrorKind::InvalidArgument, "blocks_per_level must be >= 1");
    if (in_channels != 1 || out_channels != 1) {
        throw Error(ErrorKind::InvalidArgument, "in/out channels are fixed at 1");
    }
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"levels", c.levels},
            {"base_channels", c.base_channels},
            {"blocks_per_level", c.blocks_per_level},
            {"in_channels", c.in_channels},
            {"out_channels", c.out_channels}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
    c.levels = j.value("levels", c.levels);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.blocks_per_level = j.value("blocks_per_level", c.blocks_per_level);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.validate();
    return c;
}

MicroUNet::Conv MicroUNet::make_conv(const std::string& name, std::int64_t in_c, std::int64_t out_c, int k,
                                     int stride, double bound_gain, std::uint64_t seed) {
    Rng rng(derive(seed, {tag(name)}));
    const double fan_in = static_cast<double>(in_c * k * k * k);
    const double bound = bound_gain * std::sqrt(1.0 / fan_in);
    Tensor w(Shape{out_c, in_c, k, k, k});
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    Conv c{parameter(std::move(w)), parameter(Tensor(Shape{1, out_c, 1, 1, 1}, 0.0)), stride, k / 2};
    params_.push_back({name + ".weight", c.weight});
    params_.push_back({name + ".bias", c.bias});
    return c;
}

MicroUNet::Block MicroUNet::make_block(const std::string& name, std::int64_t in_c, std::int64_t out_c,
                                       std::uint64_t seed) {
    // He-uniform bound sqrt(6 / fan_in) on the activated branch.
    const double he = std::sqrt(6.0);
    Block b;
    b.conv_a = make_conv(name + ".conv_a", in_c, out_c, 3, 1, he, seed);
    b.conv_b = make_conv(name + ".conv_b", out_c, out_c, 3, 1, he, seed);
    if (in_c != out_c) {
        b.has_proj = true;
        b.proj = make_conv(name + ".proj", in_c, out_c, 1, 1, he, seed);
    }
    return b;
}

MicroUNet::MicroUNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const double he = std::sqrt(6.0);
    auto channels = [&](int level) { return static_cast<std::int64_t>(cfg_.base_channels) << level; };

    std::int64_t in_c = cfg_.in_channels;
    for (int i = 0; i < cfg_.levels; ++i) {
        Stage st;
        const std::string prefix = "enc" + std::to_string(i);
        for (int j = 0; j < cfg_.blocks_per_level; ++j) {
            st.blocks.push_back(make_block(prefix + ".block" + std::to_string(j), in_c, channels(i), seed));
            in_c = channels(i);
        }
        if (i + 1 < cfg_.levels) {
            st.has_down = true;
            st.down = make_conv(prefix + ".down", channels(i), channels(i), 3, 2, he, seed);
        }
        encoder_.push_back(std::move(st));
    }
    decoder_.resize(static_cast<std::size_t>(std::max(cfg_.levels - 1, 0)));
    for (int i = cfg_.levels - 2; i >= 0; --i) {
        UpStage up;
        const std::string prefix = "dec" + std::to_string(i);
        up.up = make_conv(prefix + ".up", channels(i + 1), channels(i), 3, 1, he, seed);
        std::int64_t c = 2 * channels(i);
        for (int j = 0; j < cfg_.blocks_per_level; ++j) {
            up.blocks.push_back(make_block(prefix + ".block" + std::to_string(j), c, channels(i), seed));
            c = channels(i);
        }
        decoder_[static_cast<std::size_t>(i)] = std::move(up);
    }
    head_ = make_conv("head", channels(0), cfg_.out_channels, 1, 1, 1.0, seed);
}

std::int64_t MicroUNet::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.var.value().numel();
    return n;
}

void MicroUNet::zero_grad() {
    for (auto& p : params_) {
        Var v = p.var;
        v.zero_grad();
    }
}

Var MicroUNet::apply(const Conv& c, const Var& x) const { return conv3d(x, c.weight, c.bias, c.stride, c.pad); }

Var MicroUNet::apply(const Block& b, const Var& x) const {
    Var h = conv3d(leaky_relu(apply(b.conv_a, x)), b.conv_b.weight, b.conv_b.bias, 1, 1);
    Var skip = b.has_proj ? apply(b.proj, x) : x;
    return leaky_relu(add(skip, h));
}

Var MicroUNet::forward(const Var& x) const {
    const Shape& s = x.shape();
    const std::int64_t div = cfg_.spatial_divisor();
    if (s.c != cfg_.in_channels || s.d % div != 0 || s.h % div != 0 || s.w % div != 0) {
        throw Error(ErrorKind::ShapeMismatch, "model input " + to_string(s) + " needs " +
                                                  std::to_string(cfg_.in_channels) +
                                                  " channel(s) and spatial dims divisible by " + std::to_string(div));
    }
    std::vector<Var> skips;
    Var h = x;
    for (const auto& st : encoder_) {
        for (const auto& b : st.blocks) h = apply(b, h);
        if (st.has_down) {
            skips.push_back(h);
            h = leaky_relu(apply(st.down, h));
        }
    }
    for (int i = cfg_.levels - 2; i >= 0; --i) {
        const auto& up = decoder_[static_cast<std::size_t>(i)];
        h = leaky_relu(apply(up.up, upsample_nearest2x(h)));
        h = concat_channels(h, skips[static_cast<std::size_t>(i)]);
        for (const auto& b : up.blocks) h = apply(b, h);
    }
    return sigmoid(apply(head_, h));
}

}  // namespace cranial

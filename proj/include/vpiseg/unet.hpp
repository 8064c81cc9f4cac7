#pragma once

// U-net encoder/decoder with same-padded 3x3 convolutions, skip
// concatenation and a 1x1 sigmoid head.
//
//   encoder k (k = 0..depth-1): conv3x3 -> relu -> conv3x3 -> relu -> [skip] -> maxpool
//   bottleneck:                 conv3x3 -> relu -> conv3x3 -> relu
//   decoder k (k = depth-1..0): upsample2x -> concat(skip_k, up) -> conv3x3 -> relu -> conv3x3 -> relu
//   head:                       conv1x1 -> sigmoid
//
// Stack k has base_channels * 2^k channels; the bottleneck has base * 2^depth.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/rng.hpp"
#include "vpiseg/tensor.hpp"

namespace vpiseg {

struct UNetConfig {
    int depth = 4;
    int base_channels = 16;
    int in_channels = 1;
    int out_channels = 1;

    void validate() const {
        require(depth >= 1, ErrorKind::invalid_argument, "depth must be >= 1");
        require(depth <= 12, ErrorKind::invalid_argument, "depth must be <= 12");
        require(base_channels >= 1, ErrorKind::invalid_argument, "base_channels must be >= 1");
        require(in_channels >= 1 && out_channels >= 1, ErrorKind::invalid_argument,
                "channel counts must be >= 1");
    }

    /// Spatial extents must be multiples of this.
    std::size_t size_multiple() const { return std::size_t{1} << depth; }

    std::size_t stack_width(int k) const {
        return static_cast<std::size_t>(base_channels) << k;
    }

    friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

struct NamedParam {
    std::string name;
    Tensor value;
};

/// Every convolution's weight and bias, in forward order (weight before bias).
struct ParamSet {
    UNetConfig config;
    std::uint64_t seed = 0;
    std::vector<NamedParam> entries;

    std::size_t size() const { return entries.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : entries) n += p.value.numel();
        return n;
    }

    const Tensor& at(const std::string& name) const {
        for (const auto& p : entries)
            if (p.name == name) return p.value;
        fail(ErrorKind::invalid_argument, "no parameter named " + name);
    }

    void zero_grad() {
        for (auto& p : entries) p.value.zero_grad();
    }

    /// Deep copy with fresh storage.
    ParamSet clone() const {
        ParamSet out{config, seed, {}};
        for (const auto& p : entries) {
            Tensor t = p.value.detach();
            t.set_requires_grad(p.value.requires_grad());
            out.entries.push_back({p.name, t});
        }
        return out;
    }
};

struct ConvSpec {
    std::string name;
    std::size_t in_channels;
    std::size_t out_channels;
    std::size_t kernel;
};

/// Layer list implied by a config, in forward order.
inline std::vector<ConvSpec> conv_layout(const UNetConfig& cfg) {
    cfg.validate();
    std::vector<ConvSpec> layers;
    std::size_t in = static_cast<std::size_t>(cfg.in_channels);
    for (int k = 0; k < cfg.depth; ++k) {
        const std::size_t w = cfg.stack_width(k);
        const std::string p = "enc" + std::to_string(k);
        layers.push_back({p + ".conv1", in, w, 3});
        layers.push_back({p + ".conv2", w, w, 3});
        in = w;
    }
    const std::size_t mid = cfg.stack_width(cfg.depth);
    layers.push_back({"mid.conv1", in, mid, 3});
    layers.push_back({"mid.conv2", mid, mid, 3});
    std::size_t below = mid;
    for (int k = cfg.depth - 1; k >= 0; --k) {
        const std::size_t w = cfg.stack_width(k);
        const std::string p = "dec" + std::to_string(k);
        layers.push_back({p + ".conv1", w + below, w, 3});
        layers.push_back({p + ".conv2", w, w, 3});
        below = w;
    }
    layers.push_back({"head", below, static_cast<std::size_t>(cfg.out_channels), 1});
    return layers;
}

/// Allocates parameters with fan-in scaled uniform weights
/// (bound sqrt(6 / fan_in)) and zero biases.
inline ParamSet build(const UNetConfig& cfg, std::uint64_t seed) {
    ParamSet ps{cfg, seed, {}};
    Rng rng(seed);
    for (const auto& layer : conv_layout(cfg)) {
        const std::size_t fan_in = layer.in_channels * layer.kernel * layer.kernel;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w(Shape{layer.out_channels, layer.in_channels, layer.kernel, layer.kernel}, 0.0, true);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        ps.entries.push_back({layer.name + ".weight", w});
        ps.entries.push_back({layer.name + ".bias", Tensor(Shape{layer.out_channels}, 0.0, true)});
    }
    return ps;
}

inline void check_forward_input(const UNetConfig& cfg, const Tensor& image) {
    require(image.rank() == 4 && image.dim(1) == static_cast<std::size_t>(cfg.in_channels),
            ErrorKind::shape,
            "forward: expected input (B," + std::to_string(cfg.in_channels) + ",H,W), got " +
                shape_str(image.shape()));
    const std::size_t m = cfg.size_multiple();
    const std::size_t h = image.dim(2), w = image.dim(3);
    if (h % m != 0 || w % m != 0) {
        const std::size_t ph = (m - h % m) % m, pw = (m - w % m) % m;
        fail(ErrorKind::shape, "forward: input " + dims_str(h, w) + " is not divisible by " +
                                   std::to_string(m) + " (depth " + std::to_string(cfg.depth) +
                                   "); pad by " + std::to_string(ph) + " rows and " +
                                   std::to_string(pw) + " columns");
    }
    require(h > 0 && w > 0, ErrorKind::shape, "forward: empty input");
}

/// Probability map with the input's spatial size; values in (0, 1).
inline Tensor forward(const ParamSet& params, const Tensor& image) {
    const UNetConfig& cfg = params.config;
    check_forward_input(cfg, image);
    std::size_t cursor = 0;
    auto conv = [&](const Tensor& x, Padding pad = Padding::same) {
        const Tensor& w = params.entries.at(cursor).value;
        const Tensor& b = params.entries.at(cursor + 1).value;
        cursor += 2;
        return conv2d(x, w, b, pad);
    };
    auto block = [&](const Tensor& x) { return relu(conv(relu(conv(x)))); };

    std::vector<Tensor> skips;
    Tensor x = image;
    for (int k = 0; k < cfg.depth; ++k) {
        x = block(x);
        skips.push_back(x);
        x = maxpool2d(x);
    }
    x = block(x);
    for (int k = cfg.depth - 1; k >= 0; --k) {
        x = concat_channels(skips[static_cast<std::size_t>(k)], upsample2x(x));
        x = block(x);
    }
    return sigmoid(conv(x));
}

inline Image predict_probability(const ParamSet& params, const Image& image) {
    NoGradGuard no_grad;
    return to_image(forward(params, to_tensor(image)));
}

/// mask = 1 where prob >= t.
inline BinaryMask threshold_mask(const Image& prob, double t = 0.5) {
    require(t >= 0.0 && t <= 1.0, ErrorKind::invalid_argument,
            "threshold must lie in [0,1], got " + std::to_string(t));
    BinaryMask m(prob.height(), prob.width());
    for (std::size_t i = 0; i < prob.size(); ++i) m.values()[i] = prob.values()[i] >= t ? 1 : 0;
    return m;
}

inline BinaryMask threshold_mask(const Tensor& prob, double t = 0.5) {
    return threshold_mask(to_image(prob), t);
}

} // namespace vpiseg

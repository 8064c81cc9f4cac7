#pragma once

// Training-time augmentation. Every transform applies one geometric map to
// the image and its mask together.

#include <cmath>
#include <numbers>
#include <utility>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/resample.hpp"
#include "vpiseg/rng.hpp"

namespace vpiseg {

struct AugmentConfig {
    std::size_t crop_h = 128;
    std::size_t crop_w = 128;
    double flip_prob = 0.5;
    double rotation_deg = 10.0;     ///< rotation drawn from [-r, r]
    double translation_frac = 0.05; ///< shift drawn from [-f, f] of each extent
    double scale_min = 0.9;
    double scale_max = 1.1;

    void validate() const {
        require(crop_h > 0 && crop_w > 0, ErrorKind::invalid_argument, "crop size must be positive");
        require(flip_prob >= 0.0 && flip_prob <= 1.0, ErrorKind::invalid_argument, "flip_prob must lie in [0,1]");
        require(rotation_deg >= 0.0 && rotation_deg <= 180.0, ErrorKind::invalid_argument,
                "rotation range must lie in [0,180] degrees");
        require(translation_frac >= 0.0 && translation_frac < 1.0, ErrorKind::invalid_argument,
                "translation fraction must lie in [0,1)");
        require(scale_min > 0.0 && scale_min <= scale_max, ErrorKind::invalid_argument,
                "need 0 < scale_min <= scale_max");
    }
};

struct Patch {
    Image image;
    BinaryMask mask;
};

inline Patch random_crop(const Image& image, const BinaryMask& mask, std::size_t crop_h, std::size_t crop_w,
                         Rng& rng) {
    require(image.same_dims(mask), ErrorKind::shape, "random_crop: image and mask differ in size");
    require(crop_h <= image.height() && crop_w <= image.width(), ErrorKind::invalid_argument,
            "random_crop: crop " + dims_str(crop_h, crop_w) + " larger than image " + dims_str(image));
    const std::size_t top = rng.below(image.height() - crop_h + 1);
    const std::size_t left = rng.below(image.width() - crop_w + 1);
    return {crop(image, top, left, crop_h, crop_w), crop(mask, top, left, crop_h, crop_w)};
}

inline Patch random_crop(const Image& image, const BinaryMask& mask, const AugmentConfig& cfg, Rng& rng) {
    return random_crop(image, mask, cfg.crop_h, cfg.crop_w, rng);
}

/// Mirrors both about the vertical axis with probability `prob` (one draw).
inline Patch hflip(Patch p, Rng& rng, double prob = 0.5) {
    if (!rng.bernoulli(prob)) return p;
    return {mirror_columns(p.image), mirror_columns(p.mask)};
}

struct AffineParams {
    double rotation_deg = 0.0;
    double shift_x = 0.0; ///< pixels
    double shift_y = 0.0;
    double scale = 1.0;
};

inline AffineParams sample_affine(const AugmentConfig& cfg, std::size_t h, std::size_t w, Rng& rng) {
    AffineParams a;
    a.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    a.shift_x = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * static_cast<double>(w);
    a.shift_y = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * static_cast<double>(h);
    a.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    return a;
}

/// Rotation/scale about the patch centre, then translation. Inverse-mapped:
/// the image is sampled bilinearly and the mask by nearest neighbour; samples
/// falling outside the source read as 0.
inline Patch affine(const Patch& in, const AffineParams& a) {
    require(in.image.same_dims(in.mask), ErrorKind::shape, "affine: image and mask differ in size");
    require(a.scale > 0.0, ErrorKind::invalid_argument, "affine: scale must be positive");
    const std::size_t H = in.image.height(), W = in.image.width();
    const double cy = (static_cast<double>(H) - 1.0) / 2.0, cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double th = a.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    Patch out{Image(H, W, 0.0), BinaryMask(H, W, 0)};
    const double maxy = static_cast<double>(H) - 1.0, maxx = static_cast<double>(W) - 1.0;
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            const double dy = (static_cast<double>(r) - cy - a.shift_y) / a.scale;
            const double dx = (static_cast<double>(c) - cx - a.shift_x) / a.scale;
            // inverse rotation
            const double sx = cx + cs * dx + sn * dy;
            const double sy = cy - sn * dx + cs * dy;
            if (sy >= -0.5 && sx >= -0.5 && sy < maxy + 0.5 && sx < maxx + 0.5) {
                const auto ny = static_cast<std::size_t>(std::lround(std::clamp(sy, 0.0, maxy)));
                const auto nx = static_cast<std::size_t>(std::lround(std::clamp(sx, 0.0, maxx)));
                out.mask(r, c) = in.mask(ny, nx);
            }
            if (sy < 0.0 || sx < 0.0 || sy > maxy || sx > maxx) continue;
            const auto y0 = static_cast<std::size_t>(std::floor(sy));
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
            const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
            const double top = in.image(y0, x0) * (1.0 - fx) + in.image(y0, x1) * fx;
            const double bot = in.image(y1, x0) * (1.0 - fx) + in.image(y1, x1) * fx;
            out.image(r, c) = top * (1.0 - fy) + bot * fy;
        }
    return out;
}

inline Patch affine(const Patch& in, const AugmentConfig& cfg, Rng& rng) {
    return affine(in, sample_affine(cfg, in.image.height(), in.image.width(), rng));
}

/// crop -> flip -> affine, all from one stream.
inline Patch augment(const Image& image, const BinaryMask& mask, const AugmentConfig& cfg, Rng& rng) {
    Patch p = random_crop(image, mask, cfg, rng);
    p = hflip(std::move(p), rng, cfg.flip_prob);
    return affine(p, cfg, rng);
}

} // namespace vpiseg

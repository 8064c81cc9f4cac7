#pragma once

// Synthetic VPI-like spine scenes: a curved vertical midline carrying
// elliptical vertebra blobs and mirrored lateral "wing" features, rendered
// bright on a dark background, then optionally corrupted with multiplicative
// speckle and periodic horizontal occlusion bands. The mask is always the
// clean geometry.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/rng.hpp"

namespace vpiseg {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
    bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
};

struct SceneSpec {
    std::size_t height = 512;
    std::size_t width = 128;
    std::uint64_t seed = 1;

    /// Bound on |a1|, |a2|, |a3| for the midline column
    /// width * (0.5 + a1 t + a2 t^2 + a3 t^3), t in [-1, 1] down the rows.
    double curve_bound = 0.12;

    std::size_t blob_period = 32; ///< rows between vertebra centres
    Range blob_axial{5.0, 8.0};   ///< vertical semi-axis, pixels
    Range blob_lateral{7.0, 12.0};

    bool wing_pair = true;
    Range wing_offset{18.0, 24.0}; ///< midline to wing centre, pixels
    Range wing_axial{2.0, 4.0};
    Range wing_lateral{4.0, 7.0};

    Range background_level{0.05, 0.3};
    Range bone_level{0.6, 0.95};

    double speckle_sigma = 0.3;
    std::size_t speckle_grain = 1;

    std::size_t occl_period = 24;
    std::size_t occl_width = 6;
    double occl_atten = 0.4;

    void validate() const {
        auto bad = [](const std::string& m) { fail(ErrorKind::invalid_argument, "scene spec: " + m); };
        if (height < 8 || width < 8) bad("height and width must be >= 8");
        if (!(curve_bound >= 0.0 && curve_bound <= 0.5)) bad("curve_bound must lie in [0, 0.5]");
        if (blob_period < 1) bad("blob_period must be >= 1");
        for (const auto* r : {&blob_axial, &blob_lateral, &wing_offset, &wing_axial, &wing_lateral})
            if (!r->valid() || r->lo <= 0.0) bad("radius ranges must satisfy 0 < lo <= hi");
        const double quarter = static_cast<double>(width) / 4.0;
        if (blob_axial.hi > quarter || blob_lateral.hi > quarter)
            bad("blob radius exceeds width/4 (" + std::to_string(quarter) + ")");
        if (!background_level.valid() || !bone_level.valid() || background_level.lo < 0.0 ||
            bone_level.hi > 1.0)
            bad("intensity levels must lie in [0, 1]");
        if (!(bone_level.lo > background_level.hi)) bad("bone_level must exceed background_level");
        if (!(speckle_sigma >= 0.0 && std::isfinite(speckle_sigma))) bad("speckle_sigma must be >= 0");
        if (!(occl_width > 0 && occl_width < occl_period)) bad("need 0 < occl_width < occl_period");
        if (!(occl_atten > 0.0 && occl_atten <= 1.0)) bad("occl_atten must lie in (0, 1]");
    }
};

struct Scene {
    Image image; ///< clean rendering in [0, 1]
    BinaryMask mask;
    std::array<double, 3> curve{}; ///< sampled midline coefficients a1..a3
};

/// Midline column at `row` for the sampled curve, kept inside the central half.
inline double midline_column(const SceneSpec& spec, const std::array<double, 3>& a, double row) {
    const double t = spec.height > 1 ? 2.0 * row / static_cast<double>(spec.height - 1) - 1.0 : 0.0;
    const double w = static_cast<double>(spec.width);
    const double c = w * (0.5 + a[0] * t + a[1] * t * t + a[2] * t * t * t);
    return std::clamp(c, 0.25 * w, 0.75 * w);
}

/// Renders the clean scene. Depends only on the geometry and level fields
/// of `spec` (never the corruption fields).
inline Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Scene s;
    for (double& a : s.curve) a = rng.uniform(-spec.curve_bound, spec.curve_bound);
    const double bg = spec.background_level.sample(rng);
    const double bone = spec.bone_level.sample(rng);

    const std::size_t H = spec.height, W = spec.width;
    s.mask = BinaryMask(H, W, 0);
    auto paint_ellipse = [&](double rc, double cc, double ra, double rl) {
        const auto r0 = static_cast<std::ptrdiff_t>(std::floor(rc - ra));
        const auto r1 = static_cast<std::ptrdiff_t>(std::ceil(rc + ra));
        const auto c0 = static_cast<std::ptrdiff_t>(std::floor(cc - rl));
        const auto c1 = static_cast<std::ptrdiff_t>(std::ceil(cc + rl));
        for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(r0, 0);
             r <= std::min<std::ptrdiff_t>(r1, static_cast<std::ptrdiff_t>(H) - 1); ++r)
            for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(c0, 0);
                 c <= std::min<std::ptrdiff_t>(c1, static_cast<std::ptrdiff_t>(W) - 1); ++c) {
                const double dy = (static_cast<double>(r) - rc) / ra;
                const double dx = (static_cast<double>(c) - cc) / rl;
                if (dy * dy + dx * dx <= 1.0) s.mask(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
            }
    };

    const std::size_t phase = static_cast<std::size_t>(rng.below(spec.blob_period));
    for (std::size_t row = phase; row < H; row += spec.blob_period) {
        const double rc = static_cast<double>(row);
        const double cc = midline_column(spec, s.curve, rc);
        const double ra = spec.blob_axial.sample(rng);
        const double rl = spec.blob_lateral.sample(rng);
        paint_ellipse(rc, cc, ra, rl);
        if (spec.wing_pair) {
            const double off = spec.wing_offset.sample(rng);
            const double wa = spec.wing_axial.sample(rng);
            const double wl = spec.wing_lateral.sample(rng);
            paint_ellipse(rc, cc - off, wa, wl);
            paint_ellipse(rc, cc + off, wa, wl);
        }
    }

    // bone inside the mask, 2-pixel linear falloff outside it, background beyond
    constexpr int falloff = 2;
    s.image = Image(H, W, bg);
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            if (s.mask(r, c)) {
                s.image(r, c) = bone;
                continue;
            }
            double best = falloff + 1.0;
            for (int dy = -falloff; dy <= falloff; ++dy)
                for (int dx = -falloff; dx <= falloff; ++dx) {
                    const auto rr = static_cast<std::ptrdiff_t>(r) + dy;
                    const auto cc = static_cast<std::ptrdiff_t>(c) + dx;
                    if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(H) ||
                        cc >= static_cast<std::ptrdiff_t>(W))
                        continue;
                    if (s.mask(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)))
                        best = std::min(best, std::sqrt(static_cast<double>(dy * dy + dx * dx)));
                }
            if (best <= falloff) s.image(r, c) = bone - (bone - bg) * best / (falloff + 1.0);
        }
    return s;
}

/// Zero-mean, unit-variance noise field, box-smoothed with radius `grain`
/// and re-standardized.
inline Image speckle_field(std::size_t height, std::size_t width, std::size_t grain, std::uint64_t seed) {
    Rng rng(seed);
    Image raw(height, width);
    for (double& v : raw.values()) v = rng.normal();
    Image field = raw;
    if (grain > 0) {
        const auto g = static_cast<std::ptrdiff_t>(grain);
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                double acc = 0.0;
                int count = 0;
                for (std::ptrdiff_t dy = -g; dy <= g; ++dy)
                    for (std::ptrdiff_t dx = -g; dx <= g; ++dx) {
                        const auto rr = static_cast<std::ptrdiff_t>(r) + dy;
                        const auto cc = static_cast<std::ptrdiff_t>(c) + dx;
                        if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(height) ||
                            cc >= static_cast<std::ptrdiff_t>(width))
                            continue;
                        acc += raw(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                        ++count;
                    }
                field(r, c) = acc / count;
            }
    }
    const double n = static_cast<double>(field.size());
    double mean = 0.0;
    for (double v : field.values()) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : field.values()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    for (double& v : field.values()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return field;
}

/// out = clamp(image * (1 + sigma * n), 0, 1) for the seeded field n.
inline Image apply_speckle(const Image& image, double sigma, std::size_t grain, std::uint64_t seed) {
    require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::invalid_argument,
            "speckle sigma must be >= 0");
    if (sigma == 0.0) return image;
    const Image n = speckle_field(image.height(), image.width(), grain, seed);
    Image out = image;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values()[i] = std::clamp(image.values()[i] * (1.0 + sigma * n.values()[i]), 0.0, 1.0);
    return out;
}

inline std::size_t occlusion_phase(std::size_t period, std::uint64_t phase_seed) {
    return static_cast<std::size_t>(Rng(phase_seed).below(period));
}

/// Multiplies rows r with (r + phase) mod period < width by `atten`.
inline Image apply_occlusion(const Image& image, std::size_t period, std::size_t width, double atten,
                             std::uint64_t phase_seed) {
    require(width > 0 && width < period, ErrorKind::invalid_argument,
            "occlusion needs 0 < width < period (width " + std::to_string(width) + ", period " +
                std::to_string(period) + ")");
    require(atten > 0.0 && atten <= 1.0, ErrorKind::invalid_argument, "occlusion atten must lie in (0, 1]");
    const std::size_t phase = occlusion_phase(period, phase_seed);
    Image out = image;
    for (std::size_t r = 0; r < out.height(); ++r) {
        if ((r + phase) % period >= width) continue;
        for (std::size_t c = 0; c < out.width(); ++c) out(r, c) *= atten;
    }
    return out;
}

enum class NoiseProfile { clean, speckle, occlusion, speckle_occlusion };

inline std::string_view to_string(NoiseProfile p) {
    switch (p) {
    case NoiseProfile::clean: return "clean";
    case NoiseProfile::speckle: return "speckle";
    case NoiseProfile::occlusion: return "occlusion";
    case NoiseProfile::speckle_occlusion: return "speckle+occlusion";
    }
    return "clean";
}

inline NoiseProfile parse_noise_profile(std::string_view s) {
    if (s == "clean") return NoiseProfile::clean;
    if (s == "speckle") return NoiseProfile::speckle;
    if (s == "occlusion") return NoiseProfile::occlusion;
    if (s == "speckle+occlusion") return NoiseProfile::speckle_occlusion;
    fail(ErrorKind::invalid_argument, "unknown noise profile '" + std::string(s) +
                                          "' (expected clean|speckle|occlusion|speckle+occlusion)");
}

/// Applies the profile's corruptions (speckle first) with seeds derived from spec.seed.
inline Image corrupt(const Image& clean, const SceneSpec& spec, NoiseProfile profile) {
    Image out = clean;
    if (profile == NoiseProfile::speckle || profile == NoiseProfile::speckle_occlusion)
        out = apply_speckle(out, spec.speckle_sigma, spec.speckle_grain, derive_seed(spec.seed, 1));
    if (profile == NoiseProfile::occlusion || profile == NoiseProfile::speckle_occlusion)
        out = apply_occlusion(out, spec.occl_period, spec.occl_width, spec.occl_atten,
                              derive_seed(spec.seed, 2));
    return out;
}

} // namespace vpiseg

#pragma once

// Segmentation objective: pixel-mean binary cross-entropy plus a weighted
// total-variance smoothness penalty on the probability map.

#include <algorithm>
#include <cmath>
#include <string>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/tensor.hpp"

namespace vpiseg {

struct LossConfig {
    double lambda = 0.4; ///< weight of the TV term
    double eps = 1e-7;   ///< probabilities are clamped to [eps, 1 - eps] before the logs

    void validate() const {
        require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::invalid_argument,
                "loss lambda must be a finite value >= 0");
        require(eps > 0.0 && eps < 0.5, ErrorKind::invalid_argument, "loss eps must lie in (0, 0.5)");
    }
};

namespace detail {

inline void require_prob_map(const Tensor& prob, std::string_view op) {
    require(prob.rank() == 4 && prob.dim(0) == 1 && prob.dim(1) == 1, ErrorKind::shape,
            std::string(op) + ": expected a (1,1,H,W) probability map, got " + shape_str(prob.shape()));
}

} // namespace detail

/// -(1/HW) sum[y log p + (1 - y) log(1 - p)], p clamped to [eps, 1 - eps].
/// The clamp is differentiated exactly: pixels outside the band get zero gradient.
inline Tensor bce_loss(const Tensor& prob, const BinaryMask& target, double eps = 1e-7) {
    detail::require_prob_map(prob, "bce_loss");
    require(prob.dim(2) == target.height() && prob.dim(3) == target.width(), ErrorKind::shape,
            "bce_loss: probability map " + dims_str(prob.dim(2), prob.dim(3)) + " vs target " +
                dims_str(target));
    const auto p = prob.data();
    const auto y = target.values();
    const double n = static_cast<double>(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], eps, 1.0 - eps);
        acc += y[i] ? std::log(q) : std::log(1.0 - q);
    }
    auto pi = prob.impl();
    auto labels = std::make_shared<std::vector<std::uint8_t>>(y.begin(), y.end());
    return Tensor::make_result(Shape{1}, {-acc / n}, "bce_loss", {prob},
                               [pi, labels, eps, n](std::span<const double> g) {
                                   auto gp = pi->grad_buffer();
                                   const auto& pv = pi->value;
                                   for (std::size_t i = 0; i < gp.size(); ++i) {
                                       const double q = pv[i];
                                       if (q < eps || q > 1.0 - eps) continue;
                                       const double d = (*labels)[i] ? -1.0 / q : 1.0 / (1.0 - q);
                                       gp[i] += g[0] * d / n;
                                   }
                               });
}

/// Mean squared neighbour difference, normalized per direction:
///   sum_vertical (p[i,j] - p[i+1,j])^2 / ((H-1) W) + sum_horizontal (p[i,j] - p[i,j+1])^2 / (H (W-1))
inline Tensor tv_loss(const Tensor& prob) {
    detail::require_prob_map(prob, "tv_loss");
    const std::size_t H = prob.dim(2), W = prob.dim(3);
    require(H >= 2 && W >= 2, ErrorKind::shape,
            "tv_loss: map must be at least 2x2, got " + dims_str(H, W));
    const double nv = static_cast<double>((H - 1) * W);
    const double nh = static_cast<double>(H * (W - 1));
    const auto p = prob.data();
    double sv = 0.0, sh = 0.0;
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            const double v = p[i * W + j];
            if (i + 1 < H) {
                const double d = v - p[(i + 1) * W + j];
                sv += d * d;
            }
            if (j + 1 < W) {
                const double d = v - p[i * W + j + 1];
                sh += d * d;
            }
        }
    auto pi = prob.impl();
    return Tensor::make_result(Shape{1}, {sv / nv + sh / nh}, "tv_loss", {prob},
                               [pi, H, W, nv, nh](std::span<const double> g) {
                                   auto gp = pi->grad_buffer();
                                   const auto& pv = pi->value;
                                   const double kv = 2.0 * g[0] / nv, kh = 2.0 * g[0] / nh;
                                   for (std::size_t i = 0; i < H; ++i)
                                       for (std::size_t j = 0; j < W; ++j) {
                                           const std::size_t a = i * W + j;
                                           if (i + 1 < H) {
                                               const double d = kv * (pv[a] - pv[a + W]);
                                               gp[a] += d;
                                               gp[a + W] -= d;
                                           }
                                           if (j + 1 < W) {
                                               const double d = kh * (pv[a] - pv[a + 1]);
                                               gp[a] += d;
                                               gp[a + 1] -= d;
                                           }
                                       }
                               });
}

struct LossTerms {
    Tensor total;
    Tensor bce;
    Tensor tv;
};

/// total = bce + lambda * tv, with both components kept for logging.
inline LossTerms combined_loss_terms(const Tensor& prob, const BinaryMask& target, const LossConfig& cfg) {
    cfg.validate();
    Tensor bce = bce_loss(prob, target, cfg.eps);
    Tensor tv = tv_loss(prob);
    Tensor total = add(bce, scale(tv, cfg.lambda));
    return {total, bce, tv};
}

inline Tensor combined_loss(const Tensor& prob, const BinaryMask& target, const LossConfig& cfg) {
    return combined_loss_terms(prob, target, cfg).total;
}

} // namespace vpiseg

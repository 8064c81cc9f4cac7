#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the code path it is used to check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vpiseg/vpiseg.hpp"

namespace vpiseg::testing {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Random instances

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
    Tensor t(std::move(shape), 0.0, grad);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Uniform values whose magnitude is at least `gap`, for ops with a kink at 0.
inline Tensor random_away_from_zero(Shape shape, Rng& rng, double gap = 0.05) {
    Tensor t(std::move(shape), 0.0, true);
    for (double& v : t.data()) {
        const double m = rng.uniform(gap, 1.0);
        v = rng.bernoulli(0.5) ? m : -m;
    }
    return t;
}

inline BinaryMask random_mask(std::size_t h, std::size_t w, Rng& rng, double p = 0.5) {
    BinaryMask m(h, w);
    for (auto& v : m.values()) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

// ---------------------------------------------------------------------------
// Finite differences

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Relative error with a small absolute floor so entries whose true
/// derivative is ~0 compare on absolute terms.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of scalar `f` against the gradient backward() leaves in
/// each input. When `subset` is given, subset[k] lists the flat indices of
/// input k to probe; otherwise every entry is probed.
/// With `kink_retries` > 0, a probe whose one-sided differences disagree (the
/// stencil straddles a relu/maxpool switch) is redone at a 10x smaller step.
inline GradCheck gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double step,
                           const std::vector<std::vector<std::size_t>>& subset = {}, int kink_retries = 0) {
    for (auto& t : inputs) t.zero_grad();
    backward(f());
    GradCheck out;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor& t = inputs[k];
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        std::vector<std::size_t> idx;
        if (!subset.empty()) idx = subset[k];
        else
            for (std::size_t i = 0; i < t.numel(); ++i) idx.push_back(i);
        for (const std::size_t i : idx) {
            const double saved = t[i];
            double h = step, numeric = 0.0;
            for (int attempt = 0;; ++attempt, h /= 10.0) {
                double plus, minus, centre = 0.0;
                {
                    NoGradGuard ng;
                    t[i] = saved + h;
                    plus = f().item();
                    t[i] = saved - h;
                    minus = f().item();
                    t[i] = saved;
                    if (attempt < kink_retries) centre = f().item();
                }
                numeric = (plus - minus) / (2.0 * h);
                if (attempt >= kink_retries) break;
                if (rel_error((plus - centre) / h, (centre - minus) / h) < 1e-3) break;
            }
            out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[i], numeric));
            ++out.checked;
        }
    }
    return out;
}

/// Weighted sum sum_i r_i * x_i with a fixed random weight tensor, so the
/// upstream gradient reaching an op is not uniform.
inline Tensor probe(const Tensor& x, const Tensor& weights) { return sum(mul(x, weights)); }

// ---------------------------------------------------------------------------
// Metrics

/// P(s+ > s-) + 0.5 P(s+ = s-) over every positive/negative pair.
inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

/// Rank-sum form of the same statistic (average ranks for ties), O(n log n).
inline double rank_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    double npos = 0.0, nneg = 0.0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t e = k;
        while (e < order.size() && scores[order[e]] == scores[order[k]]) ++e;
        const double avg = (static_cast<double>(k + 1) + static_cast<double>(e)) / 2.0;
        for (std::size_t q = k; q < e; ++q)
            if (labels[order[q]]) rank_sum += avg;
        k = e;
    }
    for (auto l : labels) (l ? npos : nneg) += 1.0;
    return (rank_sum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

struct BrutePoint {
    double fpr, tpr;
};

/// One (fpr, tpr) per candidate threshold: +inf followed by every distinct
/// score in descending order; positives are scores >= threshold.
inline std::vector<BrutePoint> brute_force_roc(const std::vector<double>& scores,
                                               const std::vector<std::uint8_t>& labels) {
    std::vector<double> thresholds(scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.insert(thresholds.begin(), INFINITY);
    double P = 0, N = 0;
    for (auto l : labels) (l ? P : N) += 1;
    std::vector<BrutePoint> pts;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
        pts.push_back({fp / N, tp / P});
    }
    return pts;
}

inline double direct_dice(const BinaryMask& a, const BinaryMask& b) {
    double inter = 0, na = 0, nb = 0;
    for (std::size_t r = 0; r < a.height(); ++r)
        for (std::size_t c = 0; c < a.width(); ++c) {
            na += a(r, c);
            nb += b(r, c);
            inter += a(r, c) && b(r, c);
        }
    return na + nb == 0 ? 1.0 : 2 * inter / (na + nb);
}

// ---------------------------------------------------------------------------
// Model shape arithmetic

/// Scalar parameter count of the U-net written out layer by layer:
/// each 3x3 conv has 9*in*out weights + out biases, the head 1x1 has in*out + out.
inline std::size_t unet_param_count(int depth, int base, int in_ch = 1, int out_ch = 1) {
    auto conv3 = [](std::size_t in, std::size_t out) { return 9 * in * out + out; };
    std::size_t total = 0;
    std::size_t in = static_cast<std::size_t>(in_ch);
    std::size_t w = static_cast<std::size_t>(base);
    for (int k = 0; k < depth; ++k, w *= 2) {
        total += conv3(in, w) + conv3(w, w);
        in = w;
    }
    total += conv3(in, w) + conv3(w, w); // bottleneck, width base * 2^depth
    for (int k = depth - 1; k >= 0; --k) {
        const std::size_t below = w;
        w /= 2;
        total += conv3(w + below, w) + conv3(w, w);
    }
    return total + w * static_cast<std::size_t>(out_ch) + static_cast<std::size_t>(out_ch);
}

// ---------------------------------------------------------------------------
// Filesystem

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        Rng rng(derive_seed(reinterpret_cast<std::uintptr_t>(this), ++counter) ^
                static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
        m_path = fs::temp_directory_path() / ("vpiseg_" + tag + "_" + std::to_string(rng.next_u64() % 1000000000));
        fs::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return m_path; }
    fs::path operator/(const std::string& name) const { return m_path / name; }

private:
    fs::path m_path;
};

} // namespace vpiseg::testing

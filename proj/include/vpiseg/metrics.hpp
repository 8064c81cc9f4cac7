#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/io.hpp"

namespace vpiseg {

/// 2|A n B| / (|A| + |B|); two empty masks score 1.
inline double dice(const BinaryMask& pred, const BinaryMask& truth) {
    require(pred.same_dims(truth), ErrorKind::shape,
            "dice: mask dims " + dims_str(pred) + " vs " + dims_str(truth));
    std::size_t inter = 0, a = 0, b = 0;
    const auto p = pred.values(), t = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        a += p[i];
        b += t[i];
        inter += p[i] & t[i];
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    void accumulate(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
    }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
    require(pred.same_dims(truth), ErrorKind::shape,
            "confusion: mask dims " + dims_str(pred) + " vs " + dims_str(truth));
    ConfusionCounts c;
    const auto p = pred.values(), t = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] && t[i]) ++c.tp;
        else if (p[i]) ++c.fp;
        else if (t[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    /// Scores >= threshold count as positive; the first point uses +inf.
    double threshold = 0.0;

    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// Staircase ROC over every distinct score (descending), preceded by the
/// (0, 0) sentinel at threshold +inf. The last point is always (1, 1).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    require(scores.size() == labels.size(), ErrorKind::shape,
            "roc_curve: " + std::to_string(scores.size()) + " scores vs " +
                std::to_string(labels.size()) + " labels");
    std::uint64_t pos = 0;
    for (auto l : labels) pos += l ? 1 : 0;
    const std::uint64_t neg = labels.size() - pos;
    require(pos > 0 && neg > 0, ErrorKind::invalid_argument,
            "roc_curve: both classes must be present (positives " + std::to_string(pos) +
                ", negatives " + std::to_string(neg) + ")");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        while (k < order.size() && scores[order[k]] == s) {
            if (labels[order[k]]) ++tp;
            else ++fp;
            ++k;
        }
        pts.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    return pts;
}

/// Trapezoidal area under a ROC staircase.
inline double auc(std::span<const RocPoint> points) {
    require(points.size() >= 2, ErrorKind::invalid_argument, "auc: need at least two ROC points");
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    return std::clamp(area, 0.0, 1.0);
}

struct EvalReport {
    std::vector<std::string> image_ids;
    std::vector<double> dice;
    double mean_dice = 0.0;
    std::vector<RocPoint> roc;
    double auc = 0.0;
    ConfusionCounts pooled; ///< at the evaluation threshold

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Writes dice.csv, roc.csv and summary.csv into `dir`.
inline void write_report(const EvalReport& r, const fs::path& dir) {
    atomic_write(dir / "dice.csv", [&](std::ostream& out) {
        out << "image_id,dice\n";
        for (std::size_t i = 0; i < r.dice.size(); ++i)
            out << r.image_ids[i] << ',' << format_double(r.dice[i]) << '\n';
    });
    atomic_write(dir / "roc.csv", [&](std::ostream& out) {
        out << "threshold,fpr,tpr\n";
        for (const auto& p : r.roc)
            out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
                << format_double(p.tpr) << '\n';
    });
    atomic_write(dir / "summary.csv", [&](std::ostream& out) {
        out << "mean_dice,auc,tp,fp,tn,fn\n"
            << format_double(r.mean_dice) << ',' << format_double(r.auc) << ',' << r.pooled.tp << ','
            << r.pooled.fp << ',' << r.pooled.tn << ',' << r.pooled.fn << '\n';
    });
}

} // namespace vpiseg

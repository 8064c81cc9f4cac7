#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vpiseg/augment.hpp"
#include "vpiseg/checkpoint.hpp"
#include "vpiseg/config.hpp"
#include "vpiseg/dataset.hpp"
#include "vpiseg/error.hpp"
#include "vpiseg/io.hpp"
#include "vpiseg/losses.hpp"
#include "vpiseg/metrics.hpp"
#include "vpiseg/parallel.hpp"
#include "vpiseg/pgm.hpp"
#include "vpiseg/resample.hpp"
#include "vpiseg/rng.hpp"
#include "vpiseg/unet.hpp"

namespace vpiseg {

// ---------------------------------------------------------------------------
// Adam

/// First/second moments aligned with ParamSet::entries.
struct OptimizerState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

/// One Adam update with coupled L2 weight decay (added to the gradient).
inline void adam_step(ParamSet& params, OptimizerState& state, const TrainConfig& cfg) {
    if (state.m.empty()) {
        for (const auto& p : params.entries) {
            state.m.emplace_back(p.value.numel(), 0.0);
            state.v.emplace_back(p.value.numel(), 0.0);
        }
    }
    require(state.m.size() == params.entries.size(), ErrorKind::invalid_argument,
            "optimizer state does not match the parameter set");
    for (const auto& p : params.entries)
        require(p.value.has_grad(), ErrorKind::invalid_argument, "adam_step: missing gradient for " + p.name);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        Tensor& w = params.entries[i].value;
        auto theta = w.data();
        auto g = w.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double gk = g[k] + cfg.weight_decay * theta[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            theta[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double mean_bce = 0.0;
    double mean_tv = 0.0;

    friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> epochs;
    std::vector<double> step_losses;
};

struct TrainHooks {
    std::function<void(const EpochLog&, const Checkpoint&)> on_epoch;
};

inline Checkpoint make_checkpoint(const ParamSet& params, const TrainConfig& cfg) {
    return {params, static_cast<std::uint32_t>(cfg.working_h), static_cast<std::uint32_t>(cfg.working_w)};
}

/// Resizes samples to the configured working size (bilinear image, nearest mask).
inline std::vector<Sample> to_working_size(std::vector<Sample> samples, const TrainConfig& cfg) {
    if (cfg.working_h == 0) return samples;
    for (auto& s : samples) {
        s.image = resize(s.image, cfg.working_h, cfg.working_w, Interp::bilinear);
        s.mask = resize(s.mask, cfg.working_h, cfg.working_w);
    }
    return samples;
}

/// Per epoch: every training image (shuffled) contributes crops_per_image
/// augmented patches, one optimizer step each. Deterministic in cfg.train.seed.
inline TrainResult train(std::vector<Sample> samples, const RunConfig& cfg, const TrainHooks& hooks = {}) {
    cfg.validate();
    require(!samples.empty(), ErrorKind::invalid_argument, "training needs at least one training scene");
    const TrainConfig& tc = cfg.train;
    samples = to_working_size(std::move(samples), tc);
    for (const auto& s : samples)
        require(tc.augment.crop_h <= s.image.height() && tc.augment.crop_w <= s.image.width(),
                ErrorKind::invalid_argument,
                "crop " + dims_str(tc.augment.crop_h, tc.augment.crop_w) + " exceeds training image " + s.id +
                    " (" + dims_str(s.image) + ")");

    TrainResult result;
    ParamSet params = build(cfg.model, derive_seed(tc.seed, 1));
    OptimizerState opt;
    Rng rng(derive_seed(tc.seed, 2));
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double sum_loss = 0.0, sum_bce = 0.0, sum_tv = 0.0;
        std::size_t steps = 0;
        for (const std::size_t idx : order) {
            for (int c = 0; c < tc.crops_per_image; ++c) {
                const Patch patch = augment(samples[idx].image, samples[idx].mask, tc.augment, rng);
                const Tensor prob = forward(params, to_tensor(patch.image));
                const LossTerms loss = combined_loss_terms(prob, patch.mask, tc.loss);
                const double value = loss.total.item();
                if (!std::isfinite(value))
                    fail(ErrorKind::divergence, "training diverged (non-finite loss) in epoch " +
                                                    std::to_string(epoch) + ", step " +
                                                    std::to_string(result.step_losses.size() + 1));
                params.zero_grad();
                backward(loss.total);
                adam_step(params, opt, tc);
                result.step_losses.push_back(value);
                sum_loss += value;
                sum_bce += loss.bce.item();
                sum_tv += loss.tv.item();
                ++steps;
            }
        }
        const double n = static_cast<double>(steps);
        EpochLog log{epoch, sum_loss / n, sum_bce / n, sum_tv / n};
        result.epochs.push_back(log);
        if (hooks.on_epoch) hooks.on_epoch(log, make_checkpoint(params, tc));
    }
    result.checkpoint = make_checkpoint(params, tc);
    return result;
}

inline void write_loss_log(const std::vector<EpochLog>& log, const fs::path& path) {
    atomic_write(path, [&](std::ostream& out) {
        out << "epoch,mean_loss,mean_bce,mean_tv\n";
        for (const auto& e : log)
            out << e.epoch << ',' << format_double(e.mean_loss) << ',' << format_double(e.mean_bce) << ','
                << format_double(e.mean_tv) << '\n';
    });
}

/// Trains on the manifest's train split and writes model.ckpt, loss.csv,
/// config.txt and (with checkpoint_every > 0) checkpoints/epoch_NNNN.ckpt.
inline TrainResult train_to_dir(const Manifest& manifest, const RunConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    auto samples = load_samples(manifest, Split::train);
    TrainHooks hooks;
    if (cfg.train.checkpoint_every > 0)
        hooks.on_epoch = [&](const EpochLog& log, const Checkpoint& ck) {
            if (log.epoch % cfg.train.checkpoint_every != 0) return;
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04d.ckpt", log.epoch);
            save_checkpoint(ck, out_dir / "checkpoints" / name);
        };
    TrainResult r = train(std::move(samples), cfg, hooks);
    save_checkpoint(r.checkpoint, out_dir / "model.ckpt");
    write_loss_log(r.epochs, out_dir / "loss.csv");
    atomic_write(out_dir / "config.txt", [&](std::ostream& out) { out << to_config_text(cfg); });
    return r;
}

// ---------------------------------------------------------------------------
// Inference and evaluation

struct Prediction {
    Image prob;      ///< original image size, on the 16-bit grid
    BinaryMask mask; ///< prob >= threshold
};

/// resize to working size -> zero-pad to the depth multiple -> forward ->
/// crop -> resize back to the input size -> quantize -> threshold.
inline Prediction predict(const Checkpoint& ck, const Image& image, double threshold = 0.5) {
    require(!image.empty(), ErrorKind::invalid_argument, "predict: empty image");
    const std::size_t H = image.height(), W = image.width();
    const Image work = ck.working_h > 0 ? resize(image, ck.working_h, ck.working_w, Interp::bilinear) : image;
    const Image padded = pad_to_multiple(work, ck.params.config.size_multiple());
    const Image full = predict_probability(ck.params, padded);
    const Image cropped = crop(full, 0, 0, work.height(), work.width());
    Prediction p;
    p.prob = quantize_prob(resize(cropped, H, W, Interp::bilinear));
    p.mask = threshold_mask(p.prob, threshold);
    return p;
}

struct EvalResult {
    EvalReport report;
    std::vector<Prediction> predictions; ///< aligned with report.image_ids
};

/// Per-image Dice at `threshold`; ROC/AUC pooled over every test pixel.
inline EvalResult evaluate(const Checkpoint& ck, const std::vector<Sample>& samples, double threshold = 0.5) {
    require(!samples.empty(), ErrorKind::invalid_argument, "evaluation needs at least one test scene");
    require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::invalid_argument, "threshold must lie in [0,1]");
    EvalResult out;
    out.predictions.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { out.predictions[i] = predict(ck, samples[i].image, threshold); });

    EvalReport& r = out.report;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& pred = out.predictions[i];
        r.image_ids.push_back(samples[i].id);
        r.dice.push_back(dice(pred.mask, samples[i].mask));
        r.pooled.accumulate(confusion(pred.mask, samples[i].mask));
        scores.insert(scores.end(), pred.prob.values().begin(), pred.prob.values().end());
        labels.insert(labels.end(), samples[i].mask.values().begin(), samples[i].mask.values().end());
    }
    r.mean_dice = std::accumulate(r.dice.begin(), r.dice.end(), 0.0) / static_cast<double>(r.dice.size());
    r.roc = roc_curve(scores, labels);
    r.auc = auc(r.roc);
    return out;
}

/// Evaluates the manifest's test split; writes the report CSVs plus
/// prob/<id>.pgm (16-bit) and pred/<id>.pgm masks under `out_dir`.
inline EvalReport evaluate_to_dir(const Checkpoint& ck, const Manifest& manifest, const fs::path& out_dir,
                                  double threshold = 0.5) {
    const auto samples = load_samples(manifest, Split::test);
    EvalResult res = evaluate(ck, samples, threshold);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        write_prob_pgm(res.predictions[i].prob, out_dir / "prob" / (samples[i].id + ".pgm"));
        write_mask_pgm(res.predictions[i].mask, out_dir / "pred" / (samples[i].id + ".pgm"));
    }
    write_report(res.report, out_dir);
    return res.report;
}

// ---------------------------------------------------------------------------
// Paired comparison

struct CompareRow {
    std::uint64_t seed = 0;
    double mean_dice_a = 0.0;
    double mean_dice_b = 0.0;
    double auc_a = 0.0;
    double auc_b = 0.0;

    friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

/// Trains both configs per seed (the seed overrides each config's own) on
/// the train split and evaluates them on the test split.
inline std::vector<CompareRow> compare(const RunConfig& a, const RunConfig& b, const Manifest& manifest,
                                       const std::vector<std::uint64_t>& seeds) {
    require(!seeds.empty(), ErrorKind::invalid_argument, "compare needs at least one seed");
    a.validate();
    b.validate();
    const auto train_set = load_samples(manifest, Split::train);
    const auto test_set = load_samples(manifest, Split::test);
    std::vector<EvalReport> reports(2 * seeds.size());
    parallel_for(reports.size(), [&](std::size_t job) {
        RunConfig cfg = job % 2 == 0 ? a : b;
        cfg.train.seed = seeds[job / 2];
        const TrainResult tr = train(train_set, cfg);
        reports[job] = evaluate(tr.checkpoint, test_set).report;
    });
    std::vector<CompareRow> rows;
    for (std::size_t s = 0; s < seeds.size(); ++s)
        rows.push_back({seeds[s], reports[2 * s].mean_dice, reports[2 * s + 1].mean_dice, reports[2 * s].auc,
                        reports[2 * s + 1].auc});
    return rows;
}

inline void write_compare_csv(const std::vector<CompareRow>& rows, const fs::path& path) {
    atomic_write(path, [&](std::ostream& out) {
        out << "# published reference: baseline u-net dice 0.7608 auc 0.97; tv-regularized dice 0.7838 auc 0.98\n";
        out << "seed,mean_dice_a,mean_dice_b,auc_a,auc_b\n";
        double da = 0, db = 0, aa = 0, ab = 0;
        for (const auto& r : rows) {
            out << r.seed << ',' << format_double(r.mean_dice_a) << ',' << format_double(r.mean_dice_b) << ','
                << format_double(r.auc_a) << ',' << format_double(r.auc_b) << '\n';
            da += r.mean_dice_a;
            db += r.mean_dice_b;
            aa += r.auc_a;
            ab += r.auc_b;
        }
        const double n = static_cast<double>(rows.size());
        out << "mean," << format_double(da / n) << ',' << format_double(db / n) << ',' << format_double(aa / n)
            << ',' << format_double(ab / n) << '\n';
    });
}

} // namespace vpiseg

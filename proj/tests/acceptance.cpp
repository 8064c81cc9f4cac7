// Acceptance runner: one PASS/FAIL line per criterion.
//
//   vpiseg_acceptance [--work-dir DIR] [criterion ...]
//
// With no criterion numbers all seven run. Criteria 5 and 6 train six small
// networks each and dominate the runtime.

#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "support/grad_suite.hpp"

using namespace vpiseg;
using namespace vpiseg::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto results = run_grad_suite(20, 0xC0FFEE);
    const double secs = seconds_since(t0);
    bool ok = secs < 120.0;
    std::string worst;
    for (const auto& r : results) {
        ok = ok && r.ok() && r.instances >= 20;
        if (!r.ok()) worst += " " + r.op + "=" + fmt(r.max_rel_error);
    }
    double op_max = 0.0;
    for (std::size_t i = 0; i + 1 < results.size(); ++i) op_max = std::max(op_max, results[i].max_rel_error);
    return {ok, std::to_string(results.size()) + " ops x 20 instances; max rel err ops " + fmt(op_max) +
                    " (< 1e-4), full forward " + fmt(results.back().max_rel_error) + " (< 1e-3); " + fmt(secs) +
                    " s" + (worst.empty() ? "" : "; failing:" + worst)};
}

Outcome loss_identities() {
    Rng rng(0x1055);
    bool constant = true, homog = true, shift = true, bitwise = true;
    double worst_homog = 0, worst_shift = 0;
    for (int n = 0; n < 100; ++n) {
        const std::size_t h = 2 + rng.below(8), w = 2 + rng.below(8);
        Tensor c(Shape{1, 1, h, w}, rng.uniform());
        constant = constant && tv_loss(c).item() == 0.0;

        const Tensor p = random_tensor({1, 1, h, w}, rng, 0.01, 0.99, false);
        const double base = tv_loss(p).item();
        const double alpha = rng.uniform(-2, 2);
        const double dh = std::abs(tv_loss(scale(p, alpha)).item() - alpha * alpha * base);
        worst_homog = std::max(worst_homog, dh);
        homog = homog && dh <= 1e-12;

        Tensor moved = p.detach();
        const double k = rng.uniform(-1, 1);
        for (double& v : moved.data()) v += k;
        const double ds = std::abs(tv_loss(moved).item() - base);
        worst_shift = std::max(worst_shift, ds);
        shift = shift && ds <= 1e-12;

        const BinaryMask y = random_mask(h, w, rng);
        LossConfig zero;
        zero.lambda = 0.0;
        const double a = combined_loss(p, y, zero).item(), b = bce_loss(p, y).item();
        bitwise = bitwise && std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
    }
    const double two_by_two = tv_loss(Tensor(Shape{1, 1, 2, 2}, std::vector<double>{0, 1, 0, 1})).item();
    const bool exact = two_by_two == 1.0;
    return {constant && homog && shift && bitwise && exact,
            std::string("constant=0 ") + (constant ? "ok" : "FAIL") + ", homogeneity err " + fmt(worst_homog) +
                ", shift err " + fmt(worst_shift) + ", lambda=0 bitwise " + (bitwise ? "ok" : "FAIL") +
                ", [[0,1],[0,1]] -> " + format_double(two_by_two)};
}

Outcome metric_oracles() {
    Rng rng(0xA0C);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        const std::size_t len = 2 + rng.below(199);
        const std::size_t levels = 2 + rng.below(15);
        std::vector<double> s(len);
        std::vector<std::uint8_t> l(len);
        for (std::size_t i = 0; i < len; ++i) {
            s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
            l[i] = rng.bernoulli(0.5);
        }
        l[0] = 1;
        l[1] = 0;
        worst = std::max(worst, std::abs(auc(roc_curve(s, l)) - mann_whitney_auc(s, l)));
    }
    bool dice_ok = true;
    for (int n = 0; n < 100; ++n) {
        const BinaryMask a = random_mask(6, 6, rng, 0.4), b = random_mask(6, 6, rng, 0.4);
        dice_ok = dice_ok && dice(a, b) == dice(b, a) && (mask_count(a) == 0 || dice(a, a) == 1.0);
        BinaryMask disjoint(6, 6);
        for (std::size_t i = 0; i < a.size(); ++i) disjoint.values()[i] = 1 - a.values()[i];
        if (mask_count(a) > 0 && mask_count(disjoint) > 0) dice_ok = dice_ok && dice(a, disjoint) == 0.0;
    }
    const BinaryMask p(1, 4, std::vector<std::uint8_t>{1, 1, 0, 0}), t(1, 4, std::vector<std::uint8_t>{0, 1, 1, 0});
    dice_ok = dice_ok && dice(p, t) == 0.5;
    return {worst <= 1e-9 && dice_ok, "AUC vs Mann-Whitney max |diff| " + fmt(worst) +
                                          " over 100 tied instances (<= 1e-9); dice properties " +
                                          (dice_ok ? "exact" : "FAIL")};
}

Outcome overfit() {
    SceneSpec s;
    s.height = 64;
    s.width = 64;
    const Scene scene = generate_scene(s);
    RunConfig cfg;
    cfg.model.depth = 2;
    cfg.model.base_channels = 8;
    cfg.train.epochs = 200;
    cfg.train.crops_per_image = 1;
    cfg.train.augment = {64, 64, 0.0, 0.0, 0.0, 1.0, 1.0};
    const std::vector<Sample> data{{"scene", scene.image, scene.mask}};

    const auto t0 = Clock::now();
    const TrainResult a = train(data, cfg);
    const double secs = seconds_since(t0);
    const TrainResult b = train(data, cfg);
    const double d = dice(predict(a.checkpoint, scene.image).mask, scene.mask);
    const bool same = a.step_losses == b.step_losses &&
                      encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint);
    return {d > 0.95 && secs < 180.0 && same && a.step_losses.size() == 200,
            "training dice " + fmt(d) + " after " + std::to_string(a.step_losses.size()) + " steps (> 0.95), " +
                fmt(secs) + " s, rerun " + (same ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// Directional comparison (criteria 5 and 6)

struct ComparisonRun {
    std::vector<CompareRow> rows;
    double seconds = 0.0;
};

DatasetRequest comparison_data() {
    DatasetRequest req;
    req.n = 52;
    req.n_train = 40;
    req.profile = NoiseProfile::speckle_occlusion;
    req.scene.height = 512;
    req.scene.width = 128;
    req.scene.seed = 2024;
    req.scene.speckle_sigma = 0.3;
    req.scene.occl_period = 24;
    req.scene.occl_width = 6;
    req.scene.occl_atten = 0.4;
    return req;
}

RunConfig comparison_config(double lambda) {
    RunConfig cfg;
    cfg.model.depth = 3;
    cfg.model.base_channels = 8;
    cfg.train.epochs = 15;
    cfg.train.lr = 1e-3; // 1e-2 drives every ReLU dead on these scenes
    cfg.train.loss.lambda = lambda;
    return cfg;
}

/// Full CLI-equivalent pipeline into `dir`: dataset, then per seed and config
/// train_to_dir + evaluate_to_dir, then compare.csv.
ComparisonRun run_comparison(const fs::path& dir) {
    const auto t0 = Clock::now();
    fs::remove_all(dir);
    const Manifest m = generate_dataset(comparison_data(), dir / "data");
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const RunConfig configs[2] = {comparison_config(0.0), comparison_config(0.4)};
    std::vector<EvalReport> reports(2 * seeds.size());
    parallel_for(reports.size(), [&](std::size_t job) {
        RunConfig cfg = configs[job % 2];
        cfg.train.seed = seeds[job / 2];
        const fs::path run = dir / ("seed" + std::to_string(cfg.train.seed)) / (job % 2 == 0 ? "a" : "b");
        const TrainResult tr = train_to_dir(m, cfg, run / "train");
        reports[job] = evaluate_to_dir(tr.checkpoint, m, run / "eval");
    });
    ComparisonRun out;
    for (std::size_t s = 0; s < seeds.size(); ++s)
        out.rows.push_back({seeds[s], reports[2 * s].mean_dice, reports[2 * s + 1].mean_dice, reports[2 * s].auc,
                            reports[2 * s + 1].auc});
    write_compare_csv(out.rows, dir / "compare.csv");
    out.seconds = seconds_since(t0);
    return out;
}

std::optional<ComparisonRun> first_run;

Outcome directional(const fs::path& work) {
    first_run = run_comparison(work / "run1");
    double a = 0, b = 0, auc_a = 0, auc_b = 0;
    std::string per_seed;
    for (const auto& r : first_run->rows) {
        a += r.mean_dice_a / 3;
        b += r.mean_dice_b / 3;
        auc_a += r.auc_a / 3;
        auc_b += r.auc_b / 3;
        per_seed += " " + fmt(r.mean_dice_b - r.mean_dice_a);
    }
    const double secs = first_run->seconds;
    return {b >= a && secs < 1800.0, "mean dice lambda=0 " + fmt(a) + " vs lambda=0.4 " + fmt(b) + " (need >=), auc " +
                                         fmt(auc_a) + " vs " + fmt(auc_b) + ", per-seed dice deltas" + per_seed +
                                         "; " + fmt(secs / 60.0) + " min (< 30)"};
}

std::vector<fs::path> csv_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

Outcome determinism(const fs::path& work) {
    if (!first_run) first_run = run_comparison(work / "run1");
    run_comparison(work / "run2");
    const auto a = csv_files(work / "run1"), b = csv_files(work / "run2");
    std::size_t differing = 0;
    for (const auto& rel : a)
        if (!fs::exists(work / "run2" / rel) || read_file(work / "run1" / rel) != read_file(work / "run2" / rel))
            ++differing;
    const bool ok = a == b && differing == 0 && !a.empty();
    return {ok, std::to_string(a.size()) + " CSV files compared, " + std::to_string(differing) + " differ" +
                    (a == b ? "" : "; file sets differ")};
}

// ---------------------------------------------------------------------------

Outcome io_round_trips(const fs::path& work) {
    const fs::path dir = work / "io";
    fs::remove_all(dir);
    Rng rng(0x10);
    bool pgm = true, ckpt = true, manifest = true, dims = true;
    for (int n = 0; n < 10; ++n) {
        Image img(1 + rng.below(40), 1 + rng.below(40));
        for (double& v : img.values()) v = static_cast<double>(rng.below(256)) / 255.0;
        write_pgm(img, dir / "a.pgm");
        const Image back = read_pgm(dir / "a.pgm");
        write_pgm(back, dir / "b.pgm");
        pgm = pgm && back == img && read_file(dir / "a.pgm") == read_file(dir / "b.pgm");

        const Checkpoint ck{build(UNetConfig{1 + static_cast<int>(rng.below(3)), 2}, rng.next_u64()),
                            static_cast<std::uint32_t>(rng.below(500)), static_cast<std::uint32_t>(rng.below(500))};
        save_checkpoint(ck, dir / "m.ckpt");
        const Checkpoint ck2 = load_checkpoint(dir / "m.ckpt");
        ckpt = ckpt && encode_checkpoint(ck2) == read_file(dir / "m.ckpt");
        for (std::size_t i = 0; i < ck.params.size(); ++i)
            ckpt = ckpt && std::memcmp(ck.params.entries[i].value.data().data(),
                                       ck2.params.entries[i].value.data().data(),
                                       ck.params.entries[i].value.numel() * sizeof(double)) == 0;
    }
    Manifest m;
    m.root = dir;
    for (std::size_t i = 0; i < 20; ++i)
        m.entries.push_back({i, "images/" + std::to_string(i) + ".pgm", "masks/" + std::to_string(i) + ".pgm",
                             rng.bernoulli(0.7) ? Split::train : Split::test, rng.next_u64()});
    write_manifest(m, dir / "manifest.csv");
    const Manifest back = read_manifest(dir);
    write_manifest(back, dir / "manifest2.csv");
    manifest = back.entries == m.entries && read_file(dir / "manifest.csv") == read_file(dir / "manifest2.csv");

    // default model, working size 1000 x 250 padded to 1008 x 256
    const Checkpoint model{build(UNetConfig{}, 7), 1000, 250};
    std::string sizes;
    for (int n = 0; n < 10; ++n) {
        Image img(200 + rng.below(1400), 60 + rng.below(400));
        for (double& v : img.values()) v = rng.uniform();
        const Prediction p = predict(model, img);
        dims = dims && p.prob.same_dims(img) && p.mask.same_dims(img);
        sizes += " " + dims_str(img);
    }
    fs::remove_all(dir);
    return {pgm && ckpt && manifest && dims, std::string("pgm ") + (pgm ? "exact" : "FAIL") + ", checkpoint " +
                                                 (ckpt ? "exact" : "FAIL") + ", manifest " +
                                                 (manifest ? "exact" : "FAIL") + ", predict dims " +
                                                 (dims ? "preserved" : "FAIL") + " for" + sizes};
}

} // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "vpiseg_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work-dir" && i + 1 < argc) work = argv[++i];
        else if (a.size() == 1 && a[0] >= '1' && a[0] <= '7') only.insert(a[0] - '0');
        else {
            std::cerr << "usage: vpiseg_acceptance [--work-dir DIR] [1-7 ...]\n";
            return 2;
        }
    }
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient suite", gradient_suite},
        {"loss identities", loss_identities},
        {"metric oracles", metric_oracles},
        {"overfit check", overfit},
        {"directional comparison", [&] { return directional(work); }},
        {"determinism", [&] { return determinism(work); }},
        {"i/o round trips", [&] { return io_round_trips(work); }},
    };

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.contains(id)) continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[k].first << ": " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}

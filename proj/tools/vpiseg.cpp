// vpiseg command-line tool: synthetic data generation, training,
// evaluation, single-image prediction and paired configuration comparison.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vpiseg/vpiseg.hpp"

namespace {

using namespace vpiseg;

struct GenDataOptions {
    std::size_t n = 0;
    std::string split;
    std::string profile = "speckle+occlusion";
    std::string out;
    std::uint64_t seed = 1;
    SceneSpec scene;
};

struct TrainOptions {
    std::string data, config, out;
    std::optional<std::uint64_t> seed;
};

struct EvalOptions {
    std::string ckpt, data, out;
    double threshold = 0.5;
};

struct PredictOptions {
    std::string ckpt, image, out_mask, out_prob;
    double threshold = 0.5;
};

struct CompareOptions {
    std::string config_a, config_b, data, seeds, out;
};

std::pair<std::size_t, std::size_t> parse_split_ratio(const std::string& text, std::size_t n) {
    const auto parts = split(text, ':');
    require(parts.size() == 2, ErrorKind::invalid_argument, "--split expects TRAIN:TEST, got '" + text + "'");
    const auto a = parse_number<std::size_t>(parts[0], "--split train count");
    const auto b = parse_number<std::size_t>(parts[1], "--split test count");
    require(a + b == n, ErrorKind::invalid_argument,
            "--split " + text + " does not add up to --n " + std::to_string(n));
    return {a, b};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split(text, ',')) seeds.push_back(parse_number<std::uint64_t>(s, "--seeds entry"));
    require(!seeds.empty(), ErrorKind::invalid_argument, "--seeds needs at least one seed");
    return seeds;
}

void require_file(const std::string& path, const std::string& flag) {
    require(fs::is_regular_file(path), ErrorKind::io, flag + ": no such file " + path);
}

void run_gen_data(GenDataOptions o) {
    const auto [n_train, n_test] = parse_split_ratio(o.split, o.n);
    (void)n_test;
    DatasetRequest req;
    req.n = o.n;
    req.n_train = n_train;
    req.profile = parse_noise_profile(o.profile);
    req.scene = o.scene;
    req.scene.seed = o.seed;
    req.scene.validate();
    const Manifest m = generate_dataset(req, o.out);
    std::cout << "wrote " << m.entries.size() << " scenes (" << n_train << " train) to " << o.out << '\n';
}

void run_train(const TrainOptions& o) {
    require_file(o.config, "--config");
    RunConfig cfg = load_run_config(o.config);
    if (o.seed) cfg.train.seed = *o.seed;
    const Manifest m = read_manifest(o.data);
    const TrainResult r = train_to_dir(m, cfg, o.out);
    std::cout << "trained " << r.step_losses.size() << " steps; final epoch loss "
              << format_double(r.epochs.back().mean_loss) << '\n';
}

void run_eval(const EvalOptions& o) {
    require_file(o.ckpt, "--ckpt");
    const Checkpoint ck = load_checkpoint(o.ckpt);
    const Manifest m = read_manifest(o.data);
    const EvalReport r = evaluate_to_dir(ck, m, o.out, o.threshold);
    std::cout << "mean_dice=" << format_double(r.mean_dice) << " auc=" << format_double(r.auc) << '\n';
}

void run_predict(const PredictOptions& o) {
    require_file(o.ckpt, "--ckpt");
    require_file(o.image, "--image");
    require(o.threshold >= 0.0 && o.threshold <= 1.0, ErrorKind::invalid_argument, "--threshold must lie in [0,1]");
    const Checkpoint ck = load_checkpoint(o.ckpt);
    const Image img = read_pgm(o.image);
    const Prediction p = predict(ck, img, o.threshold);
    write_prob_pgm(p.prob, o.out_prob);
    write_mask_pgm(p.mask, o.out_mask);
}

void run_compare(const CompareOptions& o) {
    require_file(o.config_a, "--config-a");
    require_file(o.config_b, "--config-b");
    const RunConfig a = load_run_config(o.config_a);
    const RunConfig b = load_run_config(o.config_b);
    const auto seeds = parse_seeds(o.seeds);
    const Manifest m = read_manifest(o.data);
    const auto rows = compare(a, b, m, seeds);
    write_compare_csv(rows, o.out);
    std::cout << "wrote " << rows.size() << " comparison rows to " << o.out << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bone-feature segmentation toolkit for ultrasound spine projection images"};
    app.require_subcommand(1);

    GenDataOptions gen;
    auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset with manifest");
    g->add_option("--n", gen.n, "Number of scenes")->required()->check(CLI::PositiveNumber);
    g->add_option("--split", gen.split, "TRAIN:TEST scene counts, e.g. 80:29")->required();
    g->add_option("--profile", gen.profile, "clean|speckle|occlusion|speckle+occlusion")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--seed", gen.seed, "Template seed")->capture_default_str();
    g->add_option("--height", gen.scene.height, "Scene height in pixels")->capture_default_str();
    g->add_option("--width", gen.scene.width, "Scene width in pixels")->capture_default_str();
    g->add_option("--speckle-sigma", gen.scene.speckle_sigma, "Multiplicative speckle amplitude")->capture_default_str();
    g->add_option("--speckle-grain", gen.scene.speckle_grain, "Speckle smoothing radius")->capture_default_str();
    g->add_option("--occl-period", gen.scene.occl_period, "Rows between occlusion bands")->capture_default_str();
    g->add_option("--occl-width", gen.scene.occl_width, "Occlusion band thickness")->capture_default_str();
    g->add_option("--occl-atten", gen.scene.occl_atten, "Occlusion attenuation factor")->capture_default_str();

    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train a model on a dataset's train split");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--config", tr.config, "key=value config file")->required();
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--seed", tr.seed, "Override the config seed");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's test split");
    e->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_option("--threshold", ev.threshold, "Mask threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    PredictOptions pr;
    auto* p = app.add_subcommand("predict", "Segment one PGM image");
    p->add_option("--ckpt", pr.ckpt, "Checkpoint file")->required();
    p->add_option("--image", pr.image, "Input 8-bit PGM")->required();
    p->add_option("--out-mask", pr.out_mask, "Output mask PGM")->required();
    p->add_option("--out-prob", pr.out_prob, "Output 16-bit probability PGM")->required();
    p->add_option("--threshold", pr.threshold, "Mask threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    CompareOptions co;
    auto* c = app.add_subcommand("compare", "Train and evaluate two configs over several seeds");
    c->add_option("--config-a", co.config_a, "Baseline config")->required();
    c->add_option("--config-b", co.config_b, "Candidate config")->required();
    c->add_option("--data", co.data, "Dataset directory")->required();
    c->add_option("--seeds", co.seeds, "Comma-separated seeds, e.g. 1,2,3")->required();
    c->add_option("--out", co.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << "vpiseg: error[usage]: " << err.what() << '\n';
        return 2;
    }

    try {
        if (*g) run_gen_data(gen);
        else if (*t) run_train(tr);
        else if (*e) run_eval(ev);
        else if (*p) run_predict(pr);
        else if (*c) run_compare(co);
    } catch (const Error& err) {
        std::cerr << "vpiseg: error[" << to_string(err.kind()) << "]: " << err.what() << '\n';
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "vpiseg: error[internal]: " << err.what() << '\n';
        return 1;
    }
    return 0;
}

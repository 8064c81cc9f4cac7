#pragma once

// Run configuration and its plain-text key=value file format.
//
// One key per line, '#' starts a comment, blank lines are ignored. Unknown
// or repeated keys are errors. Recognized keys (defaults in brackets):
//
//   epochs [50]            lr [0.01]               weight_decay [1e-6]
//   beta1 [0.9]            beta2 [0.999]           adam_eps [1e-8]
//   lambda [0.4]           bce_eps [1e-7]          seed [1]
//   crops_per_image [4]    checkpoint_every [0]    (0 = final checkpoint only)
//   crop_h [128]           crop_w [128]            flip_prob [0.5]
//   rotation_deg [10]      translation_frac [0.05]
//   scale_min [0.9]        scale_max [1.1]
//   depth [4]              base_channels [16]
//   working_h [0]          working_w [0]           (0 = keep the source size)

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "vpiseg/augment.hpp"
#include "vpiseg/error.hpp"
#include "vpiseg/io.hpp"
#include "vpiseg/losses.hpp"
#include "vpiseg/unet.hpp"

namespace vpiseg {

struct TrainConfig {
    int epochs = 50;
    double lr = 0.01;
    double weight_decay = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    LossConfig loss;
    AugmentConfig augment;
    std::uint64_t seed = 1;
    int crops_per_image = 4;
    int checkpoint_every = 0;
    std::size_t working_h = 0;
    std::size_t working_w = 0;

    void validate() const {
        require(epochs >= 1, ErrorKind::invalid_argument, "epochs must be >= 1");
        require(lr > 0.0 && std::isfinite(lr), ErrorKind::invalid_argument, "lr must be > 0");
        require(weight_decay >= 0.0, ErrorKind::invalid_argument, "weight_decay must be >= 0");
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::invalid_argument,
                "adam betas must lie in [0, 1)");
        require(adam_eps > 0.0, ErrorKind::invalid_argument, "adam_eps must be > 0");
        require(crops_per_image >= 1, ErrorKind::invalid_argument, "crops_per_image must be >= 1");
        require(checkpoint_every >= 0, ErrorKind::invalid_argument, "checkpoint_every must be >= 0");
        require((working_h == 0) == (working_w == 0), ErrorKind::invalid_argument,
                "working_h and working_w must both be set or both be 0");
        loss.validate();
        augment.validate();
    }
};

struct RunConfig {
    UNetConfig model;
    TrainConfig train;

    void validate() const {
        model.validate();
        train.validate();
        const std::size_t m = model.size_multiple();
        require(train.augment.crop_h % m == 0 && train.augment.crop_w % m == 0, ErrorKind::invalid_argument,
                "crop " + dims_str(train.augment.crop_h, train.augment.crop_w) + " must be divisible by " +
                    std::to_string(m) + " for depth " + std::to_string(model.depth));
    }
};

namespace detail {

struct ConfigKey {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Field>
ConfigKey config_key(std::string_view key, Field field) {
    return {[field, key](RunConfig& c, std::string_view v) {
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(parse_number<T>(v, key));
            },
            [field](const RunConfig& c) {
                const auto v = field(const_cast<RunConfig&>(c));
                if constexpr (std::is_floating_point_v<std::remove_cvref_t<decltype(v)>>) return format_double(v);
                else return std::to_string(v);
            }};
}

inline const std::map<std::string, ConfigKey, std::less<>>& config_keys() {
    static const std::map<std::string, ConfigKey, std::less<>> keys = {
        {"epochs", config_key<int>("epochs", [](RunConfig& c) -> int& { return c.train.epochs; })},
        {"lr", config_key<double>("lr", [](RunConfig& c) -> double& { return c.train.lr; })},
        {"weight_decay", config_key<double>("weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; })},
        {"beta1", config_key<double>("beta1", [](RunConfig& c) -> double& { return c.train.beta1; })},
        {"beta2", config_key<double>("beta2", [](RunConfig& c) -> double& { return c.train.beta2; })},
        {"adam_eps", config_key<double>("adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; })},
        {"lambda", config_key<double>("lambda", [](RunConfig& c) -> double& { return c.train.loss.lambda; })},
        {"bce_eps", config_key<double>("bce_eps", [](RunConfig& c) -> double& { return c.train.loss.eps; })},
        {"seed", config_key<std::uint64_t>("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; })},
        {"crops_per_image", config_key<int>("crops_per_image", [](RunConfig& c) -> int& { return c.train.crops_per_image; })},
        {"checkpoint_every", config_key<int>("checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; })},
        {"crop_h", config_key<std::size_t>("crop_h", [](RunConfig& c) -> std::size_t& { return c.train.augment.crop_h; })},
        {"crop_w", config_key<std::size_t>("crop_w", [](RunConfig& c) -> std::size_t& { return c.train.augment.crop_w; })},
        {"flip_prob", config_key<double>("flip_prob", [](RunConfig& c) -> double& { return c.train.augment.flip_prob; })},
        {"rotation_deg", config_key<double>("rotation_deg", [](RunConfig& c) -> double& { return c.train.augment.rotation_deg; })},
        {"translation_frac", config_key<double>("translation_frac", [](RunConfig& c) -> double& { return c.train.augment.translation_frac; })},
        {"scale_min", config_key<double>("scale_min", [](RunConfig& c) -> double& { return c.train.augment.scale_min; })},
        {"scale_max", config_key<double>("scale_max", [](RunConfig& c) -> double& { return c.train.augment.scale_max; })},
        {"depth", config_key<int>("depth", [](RunConfig& c) -> int& { return c.model.depth; })},
        {"base_channels", config_key<int>("base_channels", [](RunConfig& c) -> int& { return c.model.base_channels; })},
        {"working_h", config_key<std::size_t>("working_h", [](RunConfig& c) -> std::size_t& { return c.train.working_h; })},
        {"working_w", config_key<std::size_t>("working_w", [](RunConfig& c) -> std::size_t& { return c.train.working_w; })},
    };
    return keys;
}

} // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::string& where = "config") {
    RunConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string loc = where + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        require(eq != std::string_view::npos, ErrorKind::format, loc + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto& keys = detail::config_keys();
        const auto it = keys.find(key);
        require(it != keys.end(), ErrorKind::format, loc + ": unknown key '" + std::string(key) + "'");
        require(seen.insert(std::string(key)).second, ErrorKind::format,
                loc + ": duplicate key '" + std::string(key) + "'");
        try {
            it->second.set(cfg, value);
        } catch (const Error& e) {
            fail(ErrorKind::format, loc + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(read_file(path), path.string());
}

/// Every key with its current value; parse_run_config(to_config_text(c)) == c.
inline std::string to_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& [key, k] : detail::config_keys()) os << key << '=' << k.get(cfg) << '\n';
    return os.str();
}

} // namespace vpiseg

#pragma once

// On-disk datasets: PGM images and masks plus a manifest.csv with columns
// index,image_path,mask_path,split,seed (paths relative to the manifest).

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vpiseg/error.hpp"
#include "vpiseg/io.hpp"
#include "vpiseg/parallel.hpp"
#include "vpiseg/pgm.hpp"
#include "vpiseg/rng.hpp"
#include "vpiseg/synth.hpp"

namespace vpiseg {

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    fail(ErrorKind::format, "unknown split '" + std::string(s) + "'");
}

struct ManifestEntry {
    std::size_t index = 0;
    std::string image_path;
    std::string mask_path;
    Split split = Split::train;
    std::uint64_t seed = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    fs::path root; ///< directory holding manifest.csv
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> select(Split s) const {
        std::vector<ManifestEntry> out;
        for (const auto& e : entries)
            if (e.split == s) out.push_back(e);
        return out;
    }

    fs::path image_file(const ManifestEntry& e) const { return root / e.image_path; }
    fs::path mask_file(const ManifestEntry& e) const { return root / e.mask_path; }
};

inline constexpr std::string_view manifest_header = "index,image_path,mask_path,split,seed";

inline void write_manifest(const Manifest& m, const fs::path& file) {
    atomic_write(file, [&](std::ostream& out) {
        out << manifest_header << '\n';
        for (const auto& e : m.entries)
            out << e.index << ',' << e.image_path << ',' << e.mask_path << ',' << to_string(e.split) << ','
                << e.seed << '\n';
    });
}

/// Reads `dir/manifest.csv` (or `dir` itself when it names a file).
inline Manifest read_manifest(const fs::path& dir_or_file) {
    const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / "manifest.csv" : dir_or_file;
    require(fs::exists(file), ErrorKind::io, "manifest not found: " + file.string());
    const std::string text = read_file(file);
    Manifest m;
    m.root = file.parent_path();
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) continue;
        if (line_no == 1) {
            require(line == manifest_header, ErrorKind::format,
                    file.string() + ": unexpected manifest header '" + std::string(line) + "'");
            continue;
        }
        const auto f = split(line, ',');
        require(f.size() == 5, ErrorKind::format,
                file.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
        ManifestEntry e;
        e.index = parse_number<std::size_t>(f[0], "index");
        e.image_path = f[1];
        e.mask_path = f[2];
        e.split = parse_split(f[3]);
        e.seed = parse_number<std::uint64_t>(f[4], "seed");
        m.entries.push_back(std::move(e));
    }
    return m;
}

struct DatasetRequest {
    std::size_t n = 109;
    std::size_t n_train = 80;
    SceneSpec scene; ///< template; per-scene seeds are derived from scene.seed
    NoiseProfile profile = NoiseProfile::speckle_occlusion;
};

inline std::uint64_t scene_seed(std::uint64_t template_seed, std::size_t index) {
    return derive_seed(template_seed, 0x1000 + index);
}

/// Scene indices assigned to the training split (seeded shuffle).
inline std::vector<bool> train_assignment(std::size_t n, std::size_t n_train, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5a17));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<bool> is_train(n, false);
    for (std::size_t k = 0; k < n_train; ++k) is_train[order[k]] = true;
    return is_train;
}

/// Renders, corrupts and writes `req.n` scenes plus manifest.csv under `out_dir`.
inline Manifest generate_dataset(const DatasetRequest& req, const fs::path& out_dir) {
    require(req.n >= 2, ErrorKind::invalid_argument, "dataset needs n >= 2");
    require(req.n_train >= 1 && req.n_train < req.n, ErrorKind::invalid_argument,
            "split must leave at least one scene in each of train and test");
    req.scene.validate();
    const auto is_train = train_assignment(req.n, req.n_train, req.scene.seed);

    Manifest m;
    m.root = out_dir;
    m.entries.resize(req.n);
    parallel_for(req.n, [&](std::size_t i) {
        SceneSpec spec = req.scene;
        spec.seed = scene_seed(req.scene.seed, i);
        const Scene scene = generate_scene(spec);
        const Image noisy = corrupt(scene.image, spec, req.profile);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.pgm", i);
        ManifestEntry e{i, std::string("images/") + name, std::string("masks/") + name,
                        is_train[i] ? Split::train : Split::test, spec.seed};
        write_pgm(noisy, out_dir / e.image_path);
        write_mask_pgm(scene.mask, out_dir / e.mask_path);
        m.entries[i] = std::move(e);
    });
    write_manifest(m, out_dir / "manifest.csv");
    return m;
}

struct Sample {
    std::string id;
    Image image;
    BinaryMask mask;
};

inline std::vector<Sample> load_samples(const Manifest& m, Split s) {
    const auto entries = m.select(s);
    std::vector<Sample> out(entries.size());
    parallel_for(entries.size(), [&](std::size_t i) {
        const auto& e = entries[i];
        const fs::path img = m.image_file(e), msk = m.mask_file(e);
        require(fs::exists(img), ErrorKind::io, "missing image file " + img.string());
        require(fs::exists(msk), ErrorKind::io, "missing mask file " + msk.string());
        out[i].id = fs::path(e.image_path).stem().string();
        out[i].image = read_pgm(img);
        out[i].mask = read_mask_pgm(msk);
        require(out[i].image.same_dims(out[i].mask), ErrorKind::shape,
                "image " + img.string() + " and mask " + msk.string() + " differ in size");
    });
    return out;
}

} // namespace vpiseg

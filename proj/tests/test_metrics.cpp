#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace vpiseg;
using namespace vpiseg::testing;

namespace {

BinaryMask row_mask(std::vector<std::uint8_t> v) {
    const std::size_t n = v.size();
    return BinaryMask(1, n, std::move(v));
}

/// Scores drawn from a small grid so ties are common.
void random_instance(Rng& rng, std::size_t n, std::vector<double>& scores, std::vector<std::uint8_t>& labels) {
    scores.assign(n, 0.0);
    labels.assign(n, 0);
    const std::size_t levels = 2 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = rng.bernoulli(0.4) ? 1 : 0;
        scores[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1);
    }
    labels[0] = 1;
    labels[1] = 0;
}

} // namespace

TEST_CASE("dice", "[metrics]") {
    const BinaryMask a = row_mask({1, 1, 0, 0}), b = row_mask({0, 1, 1, 0}), c = row_mask({0, 0, 1, 1});
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, c) == 0.0);
    CHECK(dice(a, b) == 0.5);
    CHECK(dice(row_mask({0, 0}), row_mask({0, 0})) == 1.0);
    CHECK_THROWS_AS(dice(a, row_mask({1})), Error);
    Rng rng(31);
    for (int n = 0; n < 100; ++n) {
        const BinaryMask x = random_mask(5, 7, rng, 0.3), y = random_mask(5, 7, rng, 0.6);
        CHECK(dice(x, y) == dice(y, x));
        CHECK(dice(x, y) == direct_dice(x, y));
        CHECK(dice(x, y) >= 0.0);
        CHECK(dice(x, y) <= 1.0);
    }
}

TEST_CASE("confusion counts", "[metrics]") {
    const ConfusionCounts c = confusion(row_mask({1, 1, 0, 0, 1}), row_mask({1, 0, 1, 0, 1}));
    CHECK(c == ConfusionCounts{2, 1, 1, 1});
}

TEST_CASE("roc_curve", "[metrics]") {
    SECTION("three-score example against threshold enumeration") {
        const std::vector<double> s{0.8, 0.6, 0.4};
        const std::vector<std::uint8_t> l{1, 0, 1};
        const auto roc = roc_curve(s, l);
        const auto brute = brute_force_roc(s, l);
        REQUIRE(roc.size() == brute.size());
        for (std::size_t i = 0; i < roc.size(); ++i) {
            CHECK(roc[i].fpr == brute[i].fpr);
            CHECK(roc[i].tpr == brute[i].tpr);
        }
        CHECK(roc[1].tpr == 0.5);
        CHECK(roc[2].fpr == 1.0);
        CHECK(auc(roc) == 0.5);
    }
    SECTION("perfect separation passes through (0,1)") {
        const auto roc = roc_curve(std::vector<double>{0.9, 0.1, 0.9, 0.1}, std::vector<std::uint8_t>{1, 0, 1, 0});
        CHECK(std::any_of(roc.begin(), roc.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
        CHECK(auc(roc) == 1.0);
    }
    SECTION("all scores equal gives the two sentinels") {
        const auto roc = roc_curve(std::vector<double>(6, 0.5), std::vector<std::uint8_t>{1, 0, 1, 0, 0, 1});
        REQUIRE(roc.size() == 2);
        CHECK((roc[0].fpr == 0 && roc[0].tpr == 0));
        CHECK((roc[1].fpr == 1 && roc[1].tpr == 1));
        CHECK(auc(roc) == 0.5);
    }
    SECTION("single-class input is rejected") {
        CHECK_THROWS_AS(roc_curve(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), Error);
    }
    SECTION("random instances: ordering, endpoints, brute force") {
        Rng rng(32);
        std::vector<double> s;
        std::vector<std::uint8_t> l;
        for (int n = 0; n < 100; ++n) {
            random_instance(rng, 2 + rng.below(60), s, l);
            const auto roc = roc_curve(s, l);
            const auto brute = brute_force_roc(s, l);
            REQUIRE(roc.size() == brute.size());
            for (std::size_t i = 0; i < roc.size(); ++i) {
                CHECK(roc[i].fpr == Catch::Approx(brute[i].fpr).margin(1e-15));
                CHECK(roc[i].tpr == Catch::Approx(brute[i].tpr).margin(1e-15));
                if (i > 0) CHECK(roc[i].fpr >= roc[i - 1].fpr);
            }
            CHECK((roc.front().fpr == 0 && roc.front().tpr == 0));
            CHECK((roc.back().fpr == 1 && roc.back().tpr == 1));
        }
    }
}

TEST_CASE("auc equals the Mann-Whitney statistic", "[metrics]") {
    Rng rng(33);
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (int n = 0; n < 100; ++n) {
        random_instance(rng, 2 + rng.below(199), s, l);
        const double a = auc(roc_curve(s, l));
        CHECK(std::abs(a - mann_whitney_auc(s, l)) <= 1e-9);
        CHECK(std::abs(a - rank_auc(s, l)) <= 1e-9);
    }
    // 50 pixels with continuous scores
    random_instance(rng, 50, s, l);
    for (double& v : s) v = rng.uniform();
    CHECK(std::abs(auc(roc_curve(s, l)) - mann_whitney_auc(s, l)) <= 1e-9);
}

TEST_CASE("report CSVs", "[metrics][io]") {
    TempDir dir("report");
    EvalReport r;
    r.image_ids = {"a", "b"};
    r.dice = {0.5, 1.0};
    r.mean_dice = 0.75;
    r.roc = roc_curve(std::vector<double>{0.8, 0.6, 0.4}, std::vector<std::uint8_t>{1, 0, 1});
    r.auc = auc(r.roc);
    r.pooled = {1, 2, 3, 4};
    write_report(r, dir.path());
    CHECK(read_file(dir / "dice.csv") == "image_id,dice\na,0.5\nb,1\n");
    CHECK(read_file(dir / "summary.csv") == "mean_dice,auc,tp,fp,tn,fn\n0.75,0.5,1,2,3,4\n");
    CHECK(read_file(dir / "roc.csv") == "threshold,fpr,tpr\ninf,0,0\n0.8,0,0.5\n0.6,1,0.5\n0.4,1,1\n");
}

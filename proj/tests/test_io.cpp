#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "support/oracles.hpp"

using namespace vpiseg;
using namespace vpiseg::testing;

namespace {

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

} // namespace

TEST_CASE("8-bit PGM", "[io][pgm]") {
    TempDir dir("pgm");
    SECTION("quantized round trip is exact") {
        Rng rng(51);
        Image img(17, 9);
        for (double& v : img.values()) v = static_cast<double>(rng.below(256)) / 255.0;
        write_pgm(img, dir / "a.pgm");
        CHECK(read_pgm(dir / "a.pgm") == img);
        write_pgm(read_pgm(dir / "a.pgm"), dir / "b.pgm");
        CHECK(read_file(dir / "a.pgm") == read_file(dir / "b.pgm"));
    }
    SECTION("1x1 white") {
        write_bytes(dir / "w.pgm", std::string("P5 1 1 255\n") + '\xff');
        CHECK(read_pgm(dir / "w.pgm")(0, 0) == 1.0);
    }
    SECTION("comments and odd whitespace") {
        const std::string payload("\x01\x02\x03\x04\x05\x06", 6);
        write_bytes(dir / "plain.pgm", "P5\n3 2\n255\n" + payload);
        write_bytes(dir / "comment.pgm", "P5\n# made by hand\n3\t \n# another\n2 255\n" + payload);
        CHECK(read_pgm(dir / "plain.pgm") == read_pgm(dir / "comment.pgm"));
    }
    SECTION("errors") {
        write_bytes(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
        CHECK_THROWS_WITH(read_pgm(dir / "p2.pgm"), Catch::Matchers::ContainsSubstring("P5"));
        write_bytes(dir / "short.pgm", "P5\n4 4\n255\n\x01\x02");
        CHECK_THROWS_WITH(read_pgm(dir / "short.pgm"), Catch::Matchers::ContainsSubstring("truncated"));
        write_bytes(dir / "deep.pgm", std::string("P5\n1 1\n1023\n\x00\x01", 14));
        CHECK_THROWS_WITH(read_pgm(dir / "deep.pgm"), Catch::Matchers::ContainsSubstring("maxval 255"));
        write_bytes(dir / "nohdr.pgm", "P5\nx 1\n255\n");
        CHECK_THROWS_WITH(read_pgm(dir / "nohdr.pgm"), Catch::Matchers::ContainsSubstring("width"));
        try {
            read_pgm(dir / "absent.pgm");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::io);
        }
    }
}

TEST_CASE("mask and probability PGMs", "[io][pgm]") {
    TempDir dir("pgm16");
    Rng rng(52);
    const BinaryMask m = random_mask(6, 11, rng);
    write_mask_pgm(m, dir / "m.pgm");
    CHECK(read_mask_pgm(dir / "m.pgm") == m);
    for (auto s : read_pgm_raster(dir / "m.pgm").samples) CHECK((s == 0 || s == 255));

    Image p(5, 4);
    for (double& v : p.values()) v = rng.uniform();
    write_prob_pgm(p, dir / "p.pgm");
    const PgmRaster raw = read_pgm_raster(dir / "p.pgm");
    CHECK(raw.maxval == 65535);
    const Image back = read_prob_pgm(dir / "p.pgm");
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(raw.samples[i] == static_cast<std::uint16_t>(std::lround(p.values()[i] * 65535.0)));
        CHECK(std::abs(back.values()[i] - p.values()[i]) <= 0.5 / 65535.0 + 1e-15);
    }
    CHECK(back == quantize_prob(p));
    CHECK(quantize_prob(back) == back);
}

TEST_CASE("atomic writes leave nothing behind on failure", "[io]") {
    TempDir dir("atomic");
    CHECK_THROWS(atomic_write(dir / "x.csv", [](std::ostream& out) {
        out << "partial";
        throw std::runtime_error("boom");
    }));
    CHECK_FALSE(fs::exists(dir / "x.csv"));
    CHECK_FALSE(fs::exists(dir / "x.csv.tmp"));
}

TEST_CASE("manifests", "[io][dataset]") {
    TempDir dir("manifest");
    Manifest m;
    m.root = dir.path();
    m.entries = {{0, "images/a.pgm", "masks/a.pgm", Split::train, 18446744073709551615ull},
                 {1, "images/b.pgm", "masks/b.pgm", Split::test, 7}};
    write_manifest(m, dir / "manifest.csv");
    const Manifest back = read_manifest(dir.path());
    CHECK(back.entries == m.entries);
    write_manifest(back, dir / "again.csv");
    CHECK(read_file(dir / "manifest.csv") == read_file(dir / "again.csv"));
    write_bytes(dir / "bad.csv", "index,image,mask\n");
    CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), Error);
    write_bytes(dir / "bad2.csv", std::string(manifest_header) + "\n0,a,b,validation,1\n");
    CHECK_THROWS_AS(read_manifest(dir / "bad2.csv"), Error);
    CHECK_THROWS_AS(read_manifest(dir / "nowhere"), Error);
}

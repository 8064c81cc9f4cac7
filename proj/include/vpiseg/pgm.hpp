#pragma once

// Binary PGM (P5) reading and writing. 8-bit files carry images and masks,
// 16-bit files (big-endian samples, maxval 65535) carry probability maps.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/io.hpp"

namespace vpiseg {

struct PgmRaster {
    std::size_t height = 0;
    std::size_t width = 0;
    unsigned maxval = 0;
    std::vector<std::uint16_t> samples;
};

namespace detail {

class PgmHeaderReader {
public:
    PgmHeaderReader(std::string_view bytes, std::string where) : m_bytes(bytes), m_where(std::move(where)) {}

    void skip_space_and_comments() {
        while (m_pos < m_bytes.size()) {
            const char c = m_bytes[m_pos];
            if (c == '#') {
                while (m_pos < m_bytes.size() && m_bytes[m_pos] != '\n' && m_bytes[m_pos] != '\r') ++m_pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++m_pos;
            } else {
                break;
            }
        }
    }

    unsigned long read_uint(std::string_view field) {
        skip_space_and_comments();
        const std::size_t start = m_pos;
        while (m_pos < m_bytes.size() && std::isdigit(static_cast<unsigned char>(m_bytes[m_pos]))) ++m_pos;
        require(m_pos > start, ErrorKind::format,
                m_where + ": malformed PGM header, expected " + std::string(field));
        require(m_pos - start <= 9, ErrorKind::format,
                m_where + ": PGM " + std::string(field) + " out of range");
        return std::stoul(std::string(m_bytes.substr(start, m_pos - start)));
    }

    void expect_magic() {
        require(m_bytes.size() >= 2 && m_bytes[0] == 'P' && m_bytes[1] == '5', ErrorKind::format,
                m_where + ": not a binary PGM (magic P5 expected)");
        m_pos = 2;
    }

    /// Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        require(m_pos < m_bytes.size() && std::isspace(static_cast<unsigned char>(m_bytes[m_pos])),
                ErrorKind::format, m_where + ": malformed PGM header after maxval");
        return m_pos + 1;
    }

private:
    std::string_view m_bytes;
    std::string m_where;
    std::size_t m_pos = 0;
};

} // namespace detail

inline PgmRaster decode_pgm(std::string_view bytes, const std::string& where) {
    detail::PgmHeaderReader hdr(bytes, where);
    hdr.expect_magic();
    PgmRaster r;
    r.width = hdr.read_uint("width");
    r.height = hdr.read_uint("height");
    const auto maxval = hdr.read_uint("maxval");
    require(r.width > 0 && r.height > 0, ErrorKind::format, where + ": PGM has zero extent");
    require(maxval >= 1 && maxval <= 65535, ErrorKind::format,
            where + ": PGM maxval " + std::to_string(maxval) + " out of range");
    r.maxval = static_cast<unsigned>(maxval);
    const std::size_t offset = hdr.raster_offset();
    const std::size_t bps = r.maxval < 256 ? 1 : 2;
    const std::size_t need = r.width * r.height * bps;
    require(bytes.size() - offset >= need, ErrorKind::format,
            where + ": truncated PGM payload (" + std::to_string(bytes.size() - offset) + " of " +
                std::to_string(need) + " bytes)");
    r.samples.resize(r.width * r.height);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        r.samples[i] = bps == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
        require(r.samples[i] <= r.maxval, ErrorKind::format, where + ": PGM sample exceeds maxval");
    }
    return r;
}

inline PgmRaster read_pgm_raster(const fs::path& path) {
    return decode_pgm(read_file(path), path.string());
}

inline void write_pgm_raster(const PgmRaster& r, const fs::path& path) {
    require(r.samples.size() == r.width * r.height, ErrorKind::shape, "PGM raster size mismatch");
    atomic_write(path, [&](std::ostream& out) {
        out << "P5\n" << r.width << ' ' << r.height << '\n' << r.maxval << '\n';
        if (r.maxval < 256) {
            std::string buf(r.samples.size(), '\0');
            for (std::size_t i = 0; i < r.samples.size(); ++i) buf[i] = static_cast<char>(r.samples[i]);
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        } else {
            std::string buf(2 * r.samples.size(), '\0');
            for (std::size_t i = 0; i < r.samples.size(); ++i) {
                buf[2 * i] = static_cast<char>(r.samples[i] >> 8);
                buf[2 * i + 1] = static_cast<char>(r.samples[i] & 0xff);
            }
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
    });
}

inline std::uint16_t quantize(double v, unsigned maxval) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(c * maxval));
}

/// 8-bit grayscale PGM mapped to [0, 1] as v / 255.
inline Image read_pgm(const fs::path& path) {
    PgmRaster r = read_pgm_raster(path);
    require(r.maxval == 255, ErrorKind::format,
            path.string() + ": expected maxval 255, found " + std::to_string(r.maxval));
    Image img(r.height, r.width);
    for (std::size_t i = 0; i < r.samples.size(); ++i) img.values()[i] = r.samples[i] / 255.0;
    return img;
}

inline void write_pgm(const Image& img, const fs::path& path) {
    PgmRaster r{img.height(), img.width(), 255, std::vector<std::uint16_t>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) r.samples[i] = quantize(img.values()[i], 255);
    write_pgm_raster(r, path);
}

/// Masks are stored as {0, 255}; samples >= 128 read as foreground.
inline BinaryMask read_mask_pgm(const fs::path& path) {
    PgmRaster r = read_pgm_raster(path);
    require(r.maxval == 255, ErrorKind::format,
            path.string() + ": expected maxval 255, found " + std::to_string(r.maxval));
    BinaryMask m(r.height, r.width);
    for (std::size_t i = 0; i < r.samples.size(); ++i) m.values()[i] = r.samples[i] >= 128 ? 1 : 0;
    return m;
}

inline void write_mask_pgm(const BinaryMask& m, const fs::path& path) {
    PgmRaster r{m.height(), m.width(), 255, std::vector<std::uint16_t>(m.size())};
    for (std::size_t i = 0; i < m.size(); ++i) r.samples[i] = m.values()[i] ? 255 : 0;
    write_pgm_raster(r, path);
}

/// 16-bit probability map, sample = round(p * 65535).
inline Image read_prob_pgm(const fs::path& path) {
    PgmRaster r = read_pgm_raster(path);
    require(r.maxval == 65535, ErrorKind::format,
            path.string() + ": expected maxval 65535, found " + std::to_string(r.maxval));
    Image img(r.height, r.width);
    for (std::size_t i = 0; i < r.samples.size(); ++i) img.values()[i] = r.samples[i] / 65535.0;
    return img;
}

inline void write_prob_pgm(const Image& prob, const fs::path& path) {
    PgmRaster r{prob.height(), prob.width(), 65535, std::vector<std::uint16_t>(prob.size())};
    for (std::size_t i = 0; i < prob.size(); ++i) r.samples[i] = quantize(prob.values()[i], 65535);
    write_pgm_raster(r, path);
}

/// Rounds every value onto the 16-bit probability grid used by write_prob_pgm.
inline Image quantize_prob(const Image& prob) {
    Image out = prob;
    for (double& v : out.values()) v = quantize(v, 65535) / 65535.0;
    return out;
}

} // namespace vpiseg

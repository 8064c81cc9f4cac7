#pragma once

// Binary parameter checkpoint, all integers and floats little-endian:
//
//   magic        5 bytes  "VPSG1"
//   depth        u32
//   base         u32
//   in_channels  u32
//   out_channels u32
//   init_seed    u64
//   working_h    u32      inference resize target, 0 = keep input size
//   working_w    u32
//   count        u32      number of tensors
//   per tensor:  u32 name length, name bytes, u32 rank, u64 extents[rank],
//                f64 values[product(extents)]

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include "vpiseg/error.hpp"
#include "vpiseg/io.hpp"
#include "vpiseg/unet.hpp"

namespace vpiseg {

inline constexpr std::string_view checkpoint_magic = "VPSG1";

struct Checkpoint {
    ParamSet params;
    std::uint32_t working_h = 0;
    std::uint32_t working_w = 0;
};

namespace detail {

template <typename T>
void put_le(std::string& buf, T v) {
    std::uint64_t bits;
    if constexpr (std::is_same_v<T, double>) bits = std::bit_cast<std::uint64_t>(v);
    else bits = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class LeReader {
public:
    LeReader(std::string_view bytes, std::string where) : m_bytes(bytes), m_where(std::move(where)) {}

    template <typename T>
    T get() {
        require(m_pos + sizeof(T) <= m_bytes.size(), ErrorKind::format, m_where + ": truncated checkpoint");
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(m_bytes[m_pos + i])) << (8 * i);
        m_pos += sizeof(T);
        if constexpr (std::is_same_v<T, double>) return std::bit_cast<double>(bits);
        else return static_cast<T>(bits);
    }

    std::string_view take(std::size_t n) {
        require(m_pos + n <= m_bytes.size(), ErrorKind::format, m_where + ": truncated checkpoint");
        auto s = m_bytes.substr(m_pos, n);
        m_pos += n;
        return s;
    }

    bool done() const { return m_pos == m_bytes.size(); }

private:
    std::string_view m_bytes;
    std::string m_where;
    std::size_t m_pos = 0;
};

} // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
    const auto& cfg = ck.params.config;
    std::string buf(checkpoint_magic);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg.depth));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg.base_channels));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg.in_channels));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg.out_channels));
    detail::put_le<std::uint64_t>(buf, ck.params.seed);
    detail::put_le<std::uint32_t>(buf, ck.working_h);
    detail::put_le<std::uint32_t>(buf, ck.working_w);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.params.entries.size()));
    for (const auto& p : ck.params.entries) {
        detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.rank()));
        for (auto e : p.value.shape()) detail::put_le<std::uint64_t>(buf, e);
        for (double v : p.value.data()) detail::put_le<double>(buf, v);
    }
    return buf;
}

/// Parses and validates against the layer layout implied by the header config.
inline Checkpoint decode_checkpoint(std::string_view bytes, const std::string& where) {
    detail::LeReader in(bytes, where);
    require(in.take(checkpoint_magic.size()) == checkpoint_magic, ErrorKind::format,
            where + ": not a checkpoint (bad magic)");
    Checkpoint ck;
    UNetConfig cfg;
    cfg.depth = static_cast<int>(in.get<std::uint32_t>());
    cfg.base_channels = static_cast<int>(in.get<std::uint32_t>());
    cfg.in_channels = static_cast<int>(in.get<std::uint32_t>());
    cfg.out_channels = static_cast<int>(in.get<std::uint32_t>());
    try {
        cfg.validate();
    } catch (const Error& e) {
        fail(ErrorKind::format, where + ": invalid model config: " + e.what());
    }
    ck.params.config = cfg;
    ck.params.seed = in.get<std::uint64_t>();
    ck.working_h = in.get<std::uint32_t>();
    ck.working_w = in.get<std::uint32_t>();
    const auto count = in.get<std::uint32_t>();
    const auto layout = conv_layout(cfg);
    require(count == 2 * layout.size(), ErrorKind::format,
            where + ": expected " + std::to_string(2 * layout.size()) + " tensors, found " + std::to_string(count));
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto& layer = layout[t / 2];
        const std::string expect_name = layer.name + (t % 2 == 0 ? ".weight" : ".bias");
        const Shape expect_shape = t % 2 == 0
                                       ? Shape{layer.out_channels, layer.in_channels, layer.kernel, layer.kernel}
                                       : Shape{layer.out_channels};
        const auto name_len = in.get<std::uint32_t>();
        std::string name(in.take(name_len));
        require(name == expect_name, ErrorKind::format,
                where + ": tensor " + std::to_string(t) + " is '" + name + "', expected '" + expect_name + "'");
        const auto rank = in.get<std::uint32_t>();
        require(rank <= 8, ErrorKind::format, where + ": implausible rank for " + name);
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(in.get<std::uint64_t>());
        require(shape == expect_shape, ErrorKind::format,
                where + ": " + name + " has shape " + shape_str(shape) + ", expected " + shape_str(expect_shape));
        std::vector<double> values(shape_numel(shape));
        for (double& v : values) v = in.get<double>();
        ck.params.entries.push_back({name, Tensor(shape, std::move(values), true)});
    }
    require(in.done(), ErrorKind::format, where + ": trailing bytes after last tensor");
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
    const std::string bytes = encode_checkpoint(ck);
    atomic_write(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

inline Checkpoint load_checkpoint(const fs::path& path) {
    require(fs::exists(path), ErrorKind::io, "checkpoint not found: " + path.string());
    return decode_checkpoint(read_file(path), path.string());
}

} // namespace vpiseg

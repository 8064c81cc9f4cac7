#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vpiseg/error.hpp"
#include "vpiseg/tensor.hpp"

namespace vpiseg {

/// Dense row-major H x W raster.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, T fill = T{})
        : m_height(height), m_width(width), m_data(height * width, fill) {}
    Grid(std::size_t height, std::size_t width, std::vector<T> values)
        : m_height(height), m_width(width), m_data(std::move(values)) {
        require(m_data.size() == height * width, ErrorKind::shape,
                "grid data length does not match " + std::to_string(height) + "x" +
                    std::to_string(width));
    }

    std::size_t height() const { return m_height; }
    std::size_t width() const { return m_width; }
    std::size_t size() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return m_data[r * m_width + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return m_data[r * m_width + c]; }

    std::span<T> values() { return m_data; }
    std::span<const T> values() const { return m_data; }
    const std::vector<T>& raw() const { return m_data; }

    template <typename U>
    bool same_dims(const Grid<U>& other) const {
        return m_height == other.height() && m_width == other.width();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t m_height = 0;
    std::size_t m_width = 0;
    std::vector<T> m_data;
};

/// Grayscale intensities, nominally in [0, 1].
using Image = Grid<double>;

/// Binary segmentation mask; every element is 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

inline std::string dims_str(std::size_t h, std::size_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
}

template <typename T>
std::string dims_str(const Grid<T>& g) {
    return dims_str(g.height(), g.width());
}

inline std::size_t mask_count(const BinaryMask& m) {
    std::size_t n = 0;
    for (auto v : m.values()) n += v;
    return n;
}

inline Tensor to_tensor(const Image& img) {
    return Tensor(Shape{1, 1, img.height(), img.width()}, img.raw());
}

inline Tensor to_tensor(const BinaryMask& m) {
    std::vector<double> v(m.values().begin(), m.values().end());
    return Tensor(Shape{1, 1, m.height(), m.width()}, std::move(v));
}

/// First plane of a (1, 1, H, W) tensor as an image.
inline Image to_image(const Tensor& t) {
    require(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1, ErrorKind::shape,
            "expected a (1,1,H,W) tensor, got " + shape_str(t.shape()));
    return Image(t.dim(2), t.dim(3), std::vector<double>(t.data().begin(), t.data().end()));
}

template <typename T>
Grid<T> mirror_columns(const Grid<T>& g) {
    Grid<T> out(g.height(), g.width());
    for (std::size_t r = 0; r < g.height(); ++r)
        for (std::size_t c = 0; c < g.width(); ++c) out(r, c) = g(r, g.width() - 1 - c);
    return out;
}

} // namespace vpiseg

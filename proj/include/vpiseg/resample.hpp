#pragma once

#include <algorithm>
#include <cmath>

#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"

namespace vpiseg {

enum class Interp { bilinear, nearest };

namespace detail {

/// Half-pixel-centre source coordinate for output index `dst`.
inline double source_coord(std::size_t dst, std::size_t in, std::size_t out) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
}

inline std::size_t nearest_index(std::size_t dst, std::size_t in, std::size_t out) {
    const auto s = static_cast<std::size_t>(
        std::floor((static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out)));
    return std::min(s, in - 1);
}

} // namespace detail

/// Resamples with half-pixel-centre alignment (edges clamp).
inline Image resize(const Image& img, std::size_t target_h, std::size_t target_w,
                     Interp mode = Interp::bilinear) {
    require(target_h > 0 && target_w > 0, ErrorKind::invalid_argument, "resize target must be positive");
    require(!img.empty(), ErrorKind::invalid_argument, "resize of empty image");
    if (target_h == img.height() && target_w == img.width()) return img;
    Image out(target_h, target_w);
    const std::size_t H = img.height(), W = img.width();
    if (mode == Interp::nearest) {
        for (std::size_t r = 0; r < target_h; ++r) {
            const std::size_t sr = detail::nearest_index(r, H, target_h);
            for (std::size_t c = 0; c < target_w; ++c) out(r, c) = img(sr, detail::nearest_index(c, W, target_w));
        }
        return out;
    }
    for (std::size_t r = 0; r < target_h; ++r) {
        const double y = detail::source_coord(r, H, target_h);
        const auto y0 = static_cast<std::size_t>(std::floor(y));
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t c = 0; c < target_w; ++c) {
            const double x = detail::source_coord(c, W, target_w);
            const auto x0 = static_cast<std::size_t>(std::floor(x));
            const std::size_t x1 = std::min(x0 + 1, W - 1);
            const double fx = x - static_cast<double>(x0);
            const double top = img(y0, x0) * (1.0 - fx) + img(y0, x1) * fx;
            const double bot = img(y1, x0) * (1.0 - fx) + img(y1, x1) * fx;
            out(r, c) = top * (1.0 - fy) + bot * fy;
        }
    }
    return out;
}

/// Nearest-neighbour mask resize; stays binary.
inline BinaryMask resize(const BinaryMask& m, std::size_t target_h, std::size_t target_w) {
    require(target_h > 0 && target_w > 0, ErrorKind::invalid_argument, "resize target must be positive");
    require(!m.empty(), ErrorKind::invalid_argument, "resize of empty mask");
    if (target_h == m.height() && target_w == m.width()) return m;
    BinaryMask out(target_h, target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        const std::size_t sr = detail::nearest_index(r, m.height(), target_h);
        for (std::size_t c = 0; c < target_w; ++c) out(r, c) = m(sr, detail::nearest_index(c, m.width(), target_w));
    }
    return out;
}

/// Zero-pads on the bottom/right up to the next multiple of `multiple`.
template <typename T>
Grid<T> pad_to_multiple(const Grid<T>& g, std::size_t multiple) {
    const std::size_t h = (g.height() + multiple - 1) / multiple * multiple;
    const std::size_t w = (g.width() + multiple - 1) / multiple * multiple;
    if (h == g.height() && w == g.width()) return g;
    Grid<T> out(h, w, T{});
    for (std::size_t r = 0; r < g.height(); ++r)
        for (std::size_t c = 0; c < g.width(); ++c) out(r, c) = g(r, c);
    return out;
}

/// Top-left `h` x `w` window.
template <typename T>
Grid<T> crop(const Grid<T>& g, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    require(top + h <= g.height() && left + w <= g.width(), ErrorKind::shape,
            "crop window exceeds " + dims_str(g));
    Grid<T> out(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out(r, c) = g(top + r, left + c);
    return out;
}

} // namespace vpiseg

#pragma once

// Reverse-mode automatic differentiation over dense 64-bit tensors.
//
// A Tensor is a shared handle: copies alias the same storage, the way
// framework tensors do. Every op that has at least one input requiring a
// gradient records a Node on its output; backward() walks those nodes in
// reverse topological order. Recording is per-thread (see NoGradGuard), so
// independent graphs can be built concurrently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vpiseg/error.hpp"

namespace vpiseg {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

namespace detail {

struct TensorData;

struct Node {
    std::string_view op;
    std::vector<std::shared_ptr<TensorData>> inputs;
    /// Receives the output's gradient and accumulates into the inputs' grads.
    std::function<void(std::span<const double>)> backward;
};

struct TensorData {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // empty until first written
    bool requires_grad = false;
    std::shared_ptr<Node> node;

    /// Zero-initialized gradient buffer, allocated on first use.
    std::span<double> grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

inline thread_local int no_grad_depth = 0;

} // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_recording_enabled() { return detail::no_grad_depth == 0; }

class Tensor {
public:
    Tensor() : Tensor(Shape{0}) {}

    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
        : m_data(std::make_shared<detail::TensorData>()) {
        m_data->value.assign(shape_numel(shape), fill);
        m_data->shape = std::move(shape);
        m_data->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : m_data(std::make_shared<detail::TensorData>()) {
        require(shape_numel(shape) == values.size(), ErrorKind::shape,
                "tensor data length " + std::to_string(values.size()) +
                    " does not match shape " + shape_str(shape));
        m_data->shape = std::move(shape);
        m_data->value = std::move(values);
        m_data->requires_grad = requires_grad;
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
    }

    const Shape& shape() const { return m_data->shape; }
    std::size_t rank() const { return m_data->shape.size(); }
    std::size_t dim(std::size_t axis) const { return m_data->shape.at(axis); }
    std::size_t numel() const { return m_data->value.size(); }

    std::span<double> data() { return m_data->value; }
    std::span<const double> data() const { return m_data->value; }

    /// Empty span until a backward pass has written a gradient.
    std::span<double> grad() { return m_data->grad; }
    std::span<const double> grad() const { return m_data->grad; }
    bool has_grad() const { return !m_data->grad.empty(); }
    void zero_grad() {
        if (m_data->requires_grad) m_data->grad.assign(m_data->value.size(), 0.0);
        else m_data->grad.clear();
    }

    bool requires_grad() const { return m_data->requires_grad; }
    void set_requires_grad(bool on) { m_data->requires_grad = on; }
    bool is_leaf() const { return m_data->node == nullptr; }
    std::string_view op() const { return m_data->node ? m_data->node->op : std::string_view{"leaf"}; }

    double item() const {
        require(numel() == 1, ErrorKind::shape, "item() on tensor of shape " + shape_str(shape()));
        return m_data->value[0];
    }

    double& operator[](std::size_t i) { return m_data->value[i]; }
    double operator[](std::size_t i) const { return m_data->value[i]; }

    /// 4-D accessor (batch, channel, row, col).
    double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
        return m_data->value[offset4(b, c, y, x)];
    }
    double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return m_data->value[offset4(b, c, y, x)];
    }

    /// Leaf copy of the values, cut from any graph.
    Tensor detach() const { return Tensor(shape(), m_data->value); }

    bool same_storage(const Tensor& other) const { return m_data == other.m_data; }

    const std::shared_ptr<detail::TensorData>& impl() const { return m_data; }

    /// Builds an op output. The node is attached only when recording is on
    /// and some input requires a gradient.
    static Tensor make_result(Shape shape, std::vector<double> values, std::string_view op,
                              std::vector<Tensor> inputs,
                              std::function<void(std::span<const double>)> backward) {
        Tensor out(std::move(shape), std::move(values));
        const bool needs = grad_recording_enabled() &&
                           std::any_of(inputs.begin(), inputs.end(),
                                       [](const Tensor& t) { return t.requires_grad(); });
        if (needs) {
            auto node = std::make_shared<detail::Node>();
            node->op = op;
            for (auto& t : inputs) node->inputs.push_back(t.m_data);
            node->backward = std::move(backward);
            out.m_data->node = std::move(node);
            out.m_data->requires_grad = true;
        }
        return out;
    }

private:
    std::size_t offset4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        const auto& s = m_data->shape;
        return ((b * s[1] + c) * s[2] + y) * s[3] + x;
    }

    std::shared_ptr<detail::TensorData> m_data;
};

/// Topologically ordered record of the operation outputs reachable from a root.
class Graph {
public:
    static Graph trace(const Tensor& root) {
        Graph g;
        std::unordered_set<const detail::TensorData*> seen;
        // iterative post-order DFS; inputs precede their consumers in `order`
        std::vector<std::pair<detail::TensorData*, std::size_t>> stack;
        stack.emplace_back(root.impl().get(), 0);
        seen.insert(root.impl().get());
        while (!stack.empty()) {
            auto& [t, next] = stack.back();
            if (t->node && next < t->node->inputs.size()) {
                detail::TensorData* child = t->node->inputs[next++].get();
                if (seen.insert(child).second) stack.emplace_back(child, 0);
                continue;
            }
            if (t->node) g.m_ops.push_back(t);
            else if (t->requires_grad) g.m_leaves.push_back(t);
            stack.pop_back();
        }
        return g;
    }

    /// Op outputs in execution order.
    const std::vector<detail::TensorData*>& ops() const { return m_ops; }
    const std::vector<detail::TensorData*>& leaves() const { return m_leaves; }

private:
    std::vector<detail::TensorData*> m_ops;
    std::vector<detail::TensorData*> m_leaves;
};

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires a gradient.
inline void backward(const Tensor& root) {
    require(root.numel() == 1, ErrorKind::shape,
            "backward() needs a scalar root, got shape " + shape_str(root.shape()));
    Graph graph = Graph::trace(root);
    for (auto* leaf : graph.leaves()) leaf->grad_buffer();
    if (graph.ops().empty()) {
        if (root.requires_grad()) root.impl()->grad_buffer()[0] += 1.0;
        return;
    }
    for (auto* t : graph.ops()) t->grad.clear();
    root.impl()->grad_buffer()[0] = 1.0;
    const auto& ops = graph.ops();
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        detail::TensorData* t = *it;
        if (t->grad.empty()) continue;
        t->node->backward(t->grad);
        t->grad.clear();
        t->grad.shrink_to_fit();
    }
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
    require(a.shape() == b.shape(), ErrorKind::shape,
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
}

inline void require_rank4(const Tensor& t, std::string_view op, std::string_view what) {
    require(t.rank() == 4, ErrorKind::shape,
            std::string(op) + ": " + std::string(what) + " must be 4-D (B,C,H,W), got " +
                shape_str(t.shape()));
}

} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto ai = a.impl(), bi = b.impl();
    return Tensor::make_result(a.shape(), std::move(out), "add", {a, b},
                               [ai, bi](std::span<const double> g) {
                                   if (ai->requires_grad) {
                                       auto ga = ai->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                   }
                                   if (bi->requires_grad) {
                                       auto gb = bi->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                                   }
                               });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto ai = a.impl(), bi = b.impl();
    return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b},
                               [ai, bi](std::span<const double> g) {
                                   if (ai->requires_grad) {
                                       auto ga = ai->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i)
                                           ga[i] += g[i] * bi->value[i];
                                   }
                                   if (bi->requires_grad) {
                                       auto gb = bi->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i)
                                           gb[i] += g[i] * ai->value[i];
                                   }
                               });
}

inline Tensor scale(const Tensor& a, double k) {
    std::vector<double> out(a.numel());
    auto av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * av[i];
    auto ai = a.impl();
    return Tensor::make_result(a.shape(), std::move(out), "scale", {a},
                               [ai, k](std::span<const double> g) {
                                   auto ga = ai->grad_buffer();
                                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
                               });
}

inline Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    auto xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 || std::isnan(xv[i]) ? xv[i] : 0.0;
    auto xi = x.impl();
    return Tensor::make_result(x.shape(), std::move(out), "relu", {x},
                               [xi](std::span<const double> g) {
                                   auto gx = xi->grad_buffer();
                                   // derivative at exactly 0 is taken as 0
                                   for (std::size_t i = 0; i < g.size(); ++i)
                                       if (xi->value[i] > 0.0) gx[i] += g[i];
                               });
}

inline double sigmoid_scalar(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
    auto out = std::make_shared<std::vector<double>>(x.numel());
    auto xv = x.data();
    for (std::size_t i = 0; i < out->size(); ++i) (*out)[i] = sigmoid_scalar(xv[i]);
    std::vector<double> values = *out;
    auto xi = x.impl();
    return Tensor::make_result(x.shape(), std::move(values), "sigmoid", {x},
                               [xi, out](std::span<const double> g) {
                                   auto gx = xi->grad_buffer();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                       const double s = (*out)[i];
                                       gx[i] += g[i] * s * (1.0 - s);
                                   }
                               });
}

inline Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xi = x.impl();
    return Tensor::make_result(Shape{1}, {s}, "sum", {x}, [xi](std::span<const double> g) {
        auto gx = xi->grad_buffer();
        for (double& v : gx) v += g[0];
    });
}

inline Tensor mean(const Tensor& x) {
    require(x.numel() > 0, ErrorKind::shape, "mean of empty tensor");
    const double n = static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xi = x.impl();
    return Tensor::make_result(Shape{1}, {s / n}, "mean", {x}, [xi, n](std::span<const double> g) {
        auto gx = xi->grad_buffer();
        const double d = g[0] / n;
        for (double& v : gx) v += d;
    });
}

// ---------------------------------------------------------------------------
// Spatial ops on (B, C, H, W) tensors

enum class Padding { same, valid };

/// 2-D cross-correlation with bias.
///
/// Lowered to im2col + GEMM, tiled over bands of output rows so each column
/// buffer stays cache-resident. Backward recomputes the columns per band
/// instead of keeping them alive with the graph.
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                     Padding padding = Padding::same) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MapC = Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
    using Map = Eigen::Map<RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;

    detail::require_rank4(input, "conv2d", "input");
    detail::require_rank4(weight, "conv2d", "weight");
    const std::size_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t Cout = weight.dim(0), Kh = weight.dim(2), Kw = weight.dim(3);
    require(weight.dim(1) == Cin, ErrorKind::shape,
            "conv2d: input has " + std::to_string(Cin) + " channels but weight " +
                shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
    require(Kh % 2 == 1 && Kw % 2 == 1, ErrorKind::shape,
            "conv2d: kernel extents must be odd, got " + shape_str(weight.shape()));
    require(bias.rank() == 1 && bias.dim(0) == Cout, ErrorKind::shape,
            "conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                std::to_string(Cout) + " output channels");
    const bool same = padding == Padding::same;
    require(same || (H >= Kh && W >= Kw), ErrorKind::shape,
            "conv2d: valid padding needs input at least as large as the kernel");

    struct Geometry {
        std::size_t Cin, H, W, Kh, Kw, Ho, Wo, K, band;
        std::ptrdiff_t pad_y, pad_x;

        // column block layout: row (ci, ky, kx), column (oy - oy0, ox)
        void im2col(const double* src, std::size_t oy0, std::size_t oy1, double* col) const {
            const std::size_t n = (oy1 - oy0) * Wo;
            for (std::size_t ci = 0; ci < Cin; ++ci)
                for (std::size_t ky = 0; ky < Kh; ++ky)
                    for (std::size_t kx = 0; kx < Kw; ++kx) {
                        double* row = col + ((ci * Kh + ky) * Kw + kx) * n;
                        const auto [x0, x1, dx] = xrange(kx);
                        for (std::size_t oy = oy0; oy < oy1; ++oy) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad_y;
                            double* dst = row + (oy - oy0) * Wo;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H) || x1 <= x0) {
                                std::fill(dst, dst + Wo, 0.0);
                                continue;
                            }
                            const double* s = src + (ci * H + static_cast<std::size_t>(iy)) * W;
                            std::fill(dst, dst + x0, 0.0);
                            for (std::ptrdiff_t ox = x0; ox < x1; ++ox) dst[ox] = s[ox + dx];
                            std::fill(dst + x1, dst + Wo, 0.0);
                        }
                    }
        }

        void col2im_add(const double* col, std::size_t oy0, std::size_t oy1, double* dst) const {
            const std::size_t n = (oy1 - oy0) * Wo;
            for (std::size_t ci = 0; ci < Cin; ++ci)
                for (std::size_t ky = 0; ky < Kh; ++ky)
                    for (std::size_t kx = 0; kx < Kw; ++kx) {
                        const double* row = col + ((ci * Kh + ky) * Kw + kx) * n;
                        const auto [x0, x1, dx] = xrange(kx);
                        for (std::size_t oy = oy0; oy < oy1; ++oy) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad_y;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            double* d = dst + (ci * H + static_cast<std::size_t>(iy)) * W;
                            const double* s = row + (oy - oy0) * Wo;
                            for (std::ptrdiff_t ox = x0; ox < x1; ++ox) d[ox + dx] += s[ox];
                        }
                    }
        }

        std::tuple<std::ptrdiff_t, std::ptrdiff_t, std::ptrdiff_t> xrange(std::size_t kx) const {
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad_x;
            const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
            const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Wo),
                                                               static_cast<std::ptrdiff_t>(W) - dx);
            return {x0, x1, dx};
        }
    };

    Geometry geo{};
    geo.Cin = Cin;
    geo.H = H;
    geo.W = W;
    geo.Kh = Kh;
    geo.Kw = Kw;
    geo.pad_y = same ? static_cast<std::ptrdiff_t>(Kh / 2) : 0;
    geo.pad_x = same ? static_cast<std::ptrdiff_t>(Kw / 2) : 0;
    geo.Ho = same ? H : H - Kh + 1;
    geo.Wo = same ? W : W - Kw + 1;
    geo.K = Cin * Kh * Kw;
    // ~512 KiB of columns per band
    geo.band = std::clamp<std::size_t>(65536 / (geo.K * geo.Wo), 1, geo.Ho);
    const std::size_t P = geo.Ho * geo.Wo, K = geo.K;

    std::vector<double> out(B * Cout * P);
    std::vector<double> col(K * geo.band * geo.Wo);
    const Eigen::Map<const RowMat> wmat(weight.data().data(), Cout, K);
    for (std::size_t b = 0; b < B; ++b) {
        const double* src = input.data().data() + b * Cin * H * W;
        double* dst = out.data() + b * Cout * P;
        for (std::size_t oy0 = 0; oy0 < geo.Ho; oy0 += geo.band) {
            const std::size_t oy1 = std::min(geo.Ho, oy0 + geo.band);
            const auto n = static_cast<Eigen::Index>((oy1 - oy0) * geo.Wo);
            geo.im2col(src, oy0, oy1, col.data());
            Map o(dst + oy0 * geo.Wo, Cout, n, Eigen::OuterStride<>(P));
            o.noalias() = wmat * MapC(col.data(), K, n, Eigen::OuterStride<>(n));
        }
        for (std::size_t co = 0; co < Cout; ++co) {
            double* plane = dst + co * P;
            for (std::size_t i = 0; i < P; ++i) plane[i] += bias[co];
        }
    }

    auto xi = input.impl(), wi = weight.impl(), bi = bias.impl();
    return Tensor::make_result(
        Shape{B, Cout, geo.Ho, geo.Wo}, std::move(out), "conv2d", {input, weight, bias},
        [=](std::span<const double> g) {
            std::vector<double> cbuf(K * geo.band * geo.Wo);
            std::vector<double> dcol(xi->requires_grad ? cbuf.size() : 0);
            const Eigen::Map<const RowMat> w(wi->value.data(), Cout, K);
            for (std::size_t b = 0; b < B; ++b) {
                const double* src = xi->value.data() + b * Cin * H * W;
                const double* gb_ = g.data() + b * Cout * P;
                if (bi->requires_grad) {
                    auto gb = bi->grad_buffer();
                    for (std::size_t co = 0; co < Cout; ++co) {
                        const double* plane = gb_ + co * P;
                        double s = 0.0;
                        for (std::size_t i = 0; i < P; ++i) s += plane[i];
                        gb[co] += s;
                    }
                }
                for (std::size_t oy0 = 0; oy0 < geo.Ho; oy0 += geo.band) {
                    const std::size_t oy1 = std::min(geo.Ho, oy0 + geo.band);
                    const auto n = static_cast<Eigen::Index>((oy1 - oy0) * geo.Wo);
                    const MapC gout(gb_ + oy0 * geo.Wo, Cout, n, Eigen::OuterStride<>(P));
                    if (wi->requires_grad) {
                        geo.im2col(src, oy0, oy1, cbuf.data());
                        Eigen::Map<RowMat> gw(wi->grad_buffer().data(), Cout, K);
                        gw.noalias() += gout * MapC(cbuf.data(), K, n, Eigen::OuterStride<>(n)).transpose();
                    }
                    if (xi->requires_grad) {
                        Map dc(dcol.data(), K, n, Eigen::OuterStride<>(n));
                        dc.noalias() = w.transpose() * gout;
                        geo.col2im_add(dcol.data(), oy0, oy1, xi->grad_buffer().data() + b * Cin * H * W);
                    }
                }
            }
        });
}

/// 2x2 max pooling with stride 2. Ties route the gradient to the first
/// maximal element in row-major window order.
inline Tensor maxpool2d(const Tensor& input) {
    detail::require_rank4(input, "maxpool2d", "input");
    const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    require(H % 2 == 0 && W % 2 == 0, ErrorKind::shape,
            "maxpool2d: spatial extents must be even, got " + shape_str(input.shape()) +
                "; pad the input first");
    const std::size_t Ho = H / 2, Wo = W / 2;
    std::vector<double> out(B * C * Ho * Wo);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    auto x = input.data();
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < B * C; ++plane) {
        const std::size_t base = plane * H * W;
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox, ++o) {
                const std::size_t i0 = base + (2 * oy) * W + 2 * ox;
                const std::size_t cand[4] = {i0, i0 + 1, i0 + W, i0 + W + 1};
                std::size_t best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (x[cand[k]] > x[best] || std::isnan(x[cand[k]])) best = cand[k];
                out[o] = x[best];
                (*argmax)[o] = best;
            }
    }
    auto xi = input.impl();
    return Tensor::make_result(Shape{B, C, Ho, Wo}, std::move(out), "maxpool2d", {input},
                               [xi, argmax](std::span<const double> g) {
                                   auto gx = xi->grad_buffer();
                                   for (std::size_t i = 0; i < g.size(); ++i)
                                       gx[(*argmax)[i]] += g[i];
                               });
}

/// Nearest-neighbour 2x upsampling.
inline Tensor upsample2x(const Tensor& input) {
    detail::require_rank4(input, "upsample2x", "input");
    const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t Ho = 2 * H, Wo = 2 * W;
    std::vector<double> out(B * C * Ho * Wo);
    auto x = input.data();
    for (std::size_t plane = 0; plane < B * C; ++plane)
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            const double* src = x.data() + (plane * H + oy / 2) * W;
            double* dst = out.data() + (plane * Ho + oy) * Wo;
            for (std::size_t ox = 0; ox < Wo; ++ox) dst[ox] = src[ox / 2];
        }
    auto xi = input.impl();
    return Tensor::make_result(Shape{B, C, Ho, Wo}, std::move(out), "upsample2x", {input},
                               [=](std::span<const double> g) {
                                   auto gx = xi->grad_buffer();
                                   for (std::size_t plane = 0; plane < B * C; ++plane)
                                       for (std::size_t oy = 0; oy < Ho; ++oy) {
                                           double* dst = gx.data() + (plane * H + oy / 2) * W;
                                           const double* src = g.data() + (plane * Ho + oy) * Wo;
                                           for (std::size_t ox = 0; ox < Wo; ++ox)
                                               dst[ox / 2] += src[ox];
                                       }
                               });
}

/// Channel-axis concatenation [a; b].
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    detail::require_rank4(a, "concat_channels", "first input");
    detail::require_rank4(b, "concat_channels", "second input");
    require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
            ErrorKind::shape,
            "concat_channels: batch/spatial mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
    const std::size_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
    const std::size_t plane = a.dim(2) * a.dim(3);
    const std::size_t na = Ca * plane, nb = Cb * plane;
    std::vector<double> out(B * (na + nb));
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(a.data().data() + i * na, na, out.data() + i * (na + nb));
        std::copy_n(b.data().data() + i * nb, nb, out.data() + i * (na + nb) + na);
    }
    auto ai = a.impl(), bi = b.impl();
    return Tensor::make_result(Shape{B, Ca + Cb, a.dim(2), a.dim(3)}, std::move(out),
                               "concat_channels", {a, b}, [=](std::span<const double> g) {
                                   for (std::size_t i = 0; i < B; ++i) {
                                       const double* src = g.data() + i * (na + nb);
                                       if (ai->requires_grad) {
                                           double* d = ai->grad_buffer().data() + i * na;
                                           for (std::size_t k = 0; k < na; ++k) d[k] += src[k];
                                       }
                                       if (bi->requires_grad) {
                                           double* d = bi->grad_buffer().data() + i * nb;
                                           for (std::size_t k = 0; k < nb; ++k) d[k] += src[na + k];
                                       }
                                   }
                               });
}

/// Channels [begin, begin + count) of a (B, C, H, W) tensor.
inline Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
    detail::require_rank4(x, "slice_channels", "input");
    require(begin + count <= x.dim(1), ErrorKind::shape,
            "slice_channels: range [" + std::to_string(begin) + "," +
                std::to_string(begin + count) + ") exceeds " + std::to_string(x.dim(1)) +
                " channels");
    const std::size_t B = x.dim(0), C = x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    std::vector<double> out(B * count * plane);
    for (std::size_t i = 0; i < B; ++i)
        std::copy_n(x.data().data() + (i * C + begin) * plane, count * plane,
                    out.data() + i * count * plane);
    auto xi = x.impl();
    return Tensor::make_result(Shape{B, count, x.dim(2), x.dim(3)}, std::move(out),
                               "slice_channels", {x}, [=](std::span<const double> g) {
                                   auto gx = xi->grad_buffer();
                                   for (std::size_t i = 0; i < B; ++i) {
                                       double* d = gx.data() + (i * C + begin) * plane;
                                       const double* s = g.data() + i * count * plane;
                                       for (std::size_t k = 0; k < count * plane; ++k) d[k] += s[k];
                                   }
                               });
}

} // namespace vpiseg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mrn/rng.hpp"
#include "mrn/tape.hpp"
#include "mrn/tensor.hpp"

namespace mrn::num {

namespace detail {

inline void ensure_finite(const Tensor& t, const char* op) {
    for (double v : t.values())
        if (!std::isfinite(v))
            throw NumericError(std::string(op) + " produced a non-finite value");
}

inline bool want_grad(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

/// outer/inner strides around one axis, for generic N-D slicing.
struct AxisView {
    std::size_t outer = 1, axis = 1, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    v.axis = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

}  // namespace detail

// ---- matmul ---------------------------------------------------------------

inline Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeMismatch("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = pa[i * k + l];
            if (av == 0.0) continue;
            const double* brow = pb + l * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    detail::ensure_finite(out, "matmul");
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape->record([ac, bc, oc, m, k, n]() mutable {
            const std::vector<double>& go = oc.grad();
            if (ac.requires_grad()) {
                std::vector<double>& ga = ac.grad();
                const double* pb2 = bc.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        double g = go[i * n + j];
                        if (g == 0.0) continue;
                        for (std::size_t l = 0; l < k; ++l) ga[i * k + l] += g * pb2[l * n + j];
                    }
            }
            if (bc.requires_grad()) {
                std::vector<double>& gb = bc.grad();
                const double* pa2 = ac.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t l = 0; l < k; ++l) {
                        double av = pa2[i * k + l];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) gb[l * n + j] += av * go[i * n + j];
                    }
            }
        });
    }
    return out;
}

// ---- elementwise binary ops -------------------------------------------------

namespace detail {

enum class BinOp { Add, Sub, Mul, Div };

/// Index mapper for elementwise broadcasting: full shape, single scalar, or
/// a rank-2 row/column vector against a rank-2 matrix.
struct BcastIndex {
    std::size_t cols = 1;
    bool scalar = false, by_row = false, by_col = false;

    std::size_t operator()(std::size_t i) const {
        if (scalar) return 0;
        if (by_row) return i / cols;   // shape {N,1} against {N,M}
        if (by_col) return i % cols;   // shape {1,M} against {N,M}
        return i;
    }
};

inline bool broadcast_spec(const Shape& small, const Shape& big, BcastIndex& idx) {
    if (small == big) return true;
    if (shape_volume(small) == 1) {
        idx.scalar = true;
        return true;
    }
    if (small.size() == 2 && big.size() == 2) {
        if (small[0] == big[0] && small[1] == 1) {
            idx.by_row = true;
            idx.cols = big[1];
            return true;
        }
        if (small[0] == 1 && small[1] == big[1]) {
            idx.by_col = true;
            idx.cols = big[1];
            return true;
        }
    }
    return false;
}

inline Tensor binary(Tape* tape, const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    BcastIndex ia, ib;
    Shape shape;
    if (broadcast_spec(b.shape(), a.shape(), ib) && a.size() >= b.size()) {
        shape = a.shape();
    } else if (broadcast_spec(a.shape(), b.shape(), ia) && b.size() >= a.size()) {
        ib = BcastIndex{};
        shape = b.shape();
    } else if (a.rank() == 2 && b.rank() == 2 && a.dim(1) == 1 && b.dim(0) == 1) {
        // column vector against row vector: outer combination {N,1} op {1,M}
        shape = {a.dim(0), b.dim(1)};
        ia.by_row = true;
        ia.cols = b.dim(1);
        ib.by_col = true;
        ib.cols = b.dim(1);
    } else {
        throw ShapeMismatch(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
    }
    std::size_t n = shape_volume(shape);
    Tensor out = Tensor::zeros(shape);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        double x = pa[ia(i)];
        double y = pb[ib(i)];
        switch (op) {
            case BinOp::Add: po[i] = x + y; break;
            case BinOp::Sub: po[i] = x - y; break;
            case BinOp::Mul: po[i] = x * y; break;
            case BinOp::Div: po[i] = x / y; break;
        }
    }
    detail::ensure_finite(out, name);
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape->record([ac, bc, oc, op, n, ia, ib]() mutable {
            const std::vector<double>& go = oc.grad();
            const double* pa2 = ac.data();
            const double* pb2 = bc.data();
            for (std::size_t i = 0; i < n; ++i) {
                double g = go[i];
                if (g == 0.0) continue;
                double x = pa2[ia(i)];
                double y = pb2[ib(i)];
                double da = 0, db = 0;
                switch (op) {
                    case BinOp::Add: da = g; db = g; break;
                    case BinOp::Sub: da = g; db = -g; break;
                    case BinOp::Mul: da = g * y; db = g * x; break;
                    case BinOp::Div: da = g / y; db = -g * x / (y * y); break;
                }
                if (ac.requires_grad()) ac.grad()[ia(i)] += da;
                if (bc.requires_grad()) bc.grad()[ib(i)] += db;
            }
        });
    }
    return out;
}

}  // namespace detail

inline Tensor add(Tape* t, const Tensor& a, const Tensor& b) {
    return detail::binary(t, a, b, detail::BinOp::Add, "add");
}
inline Tensor sub(Tape* t, const Tensor& a, const Tensor& b) {
    return detail::binary(t, a, b, detail::BinOp::Sub, "sub");
}
inline Tensor mul(Tape* t, const Tensor& a, const Tensor& b) {
    return detail::binary(t, a, b, detail::BinOp::Mul, "mul");
}
inline Tensor div(Tape* t, const Tensor& a, const Tensor& b) {
    return detail::binary(t, a, b, detail::BinOp::Div, "div");
}

// ---- elementwise unary ops --------------------------------------------------

namespace detail {

template <class Fwd, class Bwd>
inline Tensor unary(Tape* tape, const Tensor& a, Fwd fwd, Bwd bwd, const char* name) {
    Tensor out = Tensor::zeros(a.shape());
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);
    detail::ensure_finite(out, name);
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, bwd, n]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < n; ++i)
                ga[i] += go[i] * bwd(ac.data()[i], oc.data()[i]);
        });
    }
    return out;
}

}  // namespace detail

inline Tensor exp(Tape* t, const Tensor& a) {
    return detail::unary(
        t, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

inline Tensor log(Tape* t, const Tensor& a) {
    return detail::unary(
        t, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; },
        "log");
}

inline Tensor relu(Tape* t, const Tensor& a) {
    return detail::unary(
        t, a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

inline Tensor leaky_relu(Tape* t, const Tensor& a, double slope) {
    return detail::unary(
        t, a, [slope](double x) { return x > 0 ? x : slope * x; },
        [slope](double x, double) { return x > 0 ? 1.0 : slope; }, "leaky_relu");
}

inline Tensor sigmoid(Tape* t, const Tensor& a) {
    return detail::unary(
        t, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

// ---- softmax ---------------------------------------------------------------

/// Numerically stable softmax along `axis` (rank 1 or 2).
inline Tensor softmax(Tape* tape, const Tensor& a, std::size_t axis = 0) {
    if (a.rank() != 1 && a.rank() != 2)
        throw ShapeMismatch("softmax: expected rank 1 or 2, got " + shape_str(a.shape()));
    if (axis >= a.rank()) throw ShapeMismatch("softmax: axis out of range");
    std::size_t rows, cols;
    bool along_cols;  // reduce over the second index
    if (a.rank() == 1) {
        rows = 1;
        cols = a.dim(0);
        along_cols = true;
    } else {
        rows = a.dim(0);
        cols = a.dim(1);
        along_cols = axis == 1;
    }
    Tensor out = Tensor::zeros(a.shape());
    std::size_t slices = along_cols ? rows : cols;
    std::size_t len = along_cols ? cols : rows;
    auto index = [cols, along_cols](std::size_t s, std::size_t k) {
        return along_cols ? s * cols + k : k * cols + s;
    };
    for (std::size_t s = 0; s < slices; ++s) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, a.data()[index(s, k)]);
        double sum = 0;
        for (std::size_t k = 0; k < len; ++k) {
            double e = std::exp(a.data()[index(s, k)] - mx);
            out.data()[index(s, k)] = e;
            sum += e;
        }
        for (std::size_t k = 0; k < len; ++k) out.data()[index(s, k)] /= sum;
    }
    detail::ensure_finite(out, "softmax");
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, slices, len, index]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t s = 0; s < slices; ++s) {
                double dot = 0;
                for (std::size_t k = 0; k < len; ++k)
                    dot += go[index(s, k)] * oc.data()[index(s, k)];
                for (std::size_t k = 0; k < len; ++k) {
                    std::size_t i = index(s, k);
                    ga[i] += (go[i] - dot) * oc.data()[i];
                }
            }
        });
    }
    return out;
}

// ---- shape ops ---------------------------------------------------------------

inline Tensor reshape(Tape* tape, const Tensor& a, Shape shape) {
    if (shape_volume(shape) != a.size())
        throw ShapeMismatch("reshape: cannot view " + shape_str(a.shape()) + " as " +
                            shape_str(shape));
    Tensor out(std::move(shape), a.values());
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
    }
    return out;
}

inline Tensor transpose(Tape* tape, const Tensor& a) {
    if (a.rank() != 2) throw ShapeMismatch("transpose: expected rank 2");
    std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, m, n]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
        });
    }
    return out;
}

inline Tensor slice(Tape* tape, const Tensor& a, std::size_t axis, std::size_t start,
                    std::size_t len) {
    if (axis >= a.rank()) throw ShapeMismatch("slice: axis out of range");
    if (start + len > a.dim(axis)) throw ShapeMismatch("slice: range exceeds axis extent");
    detail::AxisView v = detail::axis_view(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t k = 0; k < len; ++k)
            std::copy_n(a.data() + (o * v.axis + start + k) * v.inner, v.inner,
                        out.data() + (o * len + k) * v.inner);
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, v, start, len]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t o = 0; o < v.outer; ++o)
                for (std::size_t k = 0; k < len; ++k)
                    for (std::size_t i = 0; i < v.inner; ++i)
                        ga[(o * v.axis + start + k) * v.inner + i] +=
                            go[(o * len + k) * v.inner + i];
        });
    }
    return out;
}

inline Tensor concat(Tape* tape, const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeMismatch("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeMismatch("concat: axis out of range");
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != first.size()) throw ShapeMismatch("concat: rank mismatch");
        for (std::size_t d = 0; d < first.size(); ++d)
            if (d != axis && p.shape()[d] != first[d])
                throw ShapeMismatch("concat: off-axis extent mismatch");
        total += p.dim(axis);
    }
    Shape out_shape = first;
    out_shape[axis] = total;
    Tensor out = Tensor::zeros(out_shape);
    detail::AxisView ov = detail::axis_view(out_shape, axis);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::size_t len = p.dim(axis);
        for (std::size_t o = 0; o < ov.outer; ++o)
            std::copy_n(p.data() + o * len * ov.inner, len * ov.inner,
                        out.data() + (o * ov.axis + offset) * ov.inner);
        offset += len;
    }
    bool any_grad = false;
    for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
    if (tape && any_grad) {
        out.set_requires_grad(true);
        std::vector<Tensor> pc = parts;
        Tensor oc = out;
        tape->record([pc, oc, ov, axis]() mutable {
            const std::vector<double>& go = oc.grad();
            std::size_t offset2 = 0;
            for (Tensor& p : pc) {
                std::size_t len = p.shape()[axis];
                if (p.requires_grad()) {
                    std::vector<double>& gp = p.grad();
                    for (std::size_t o = 0; o < ov.outer; ++o)
                        for (std::size_t i = 0; i < len * ov.inner; ++i)
                            gp[o * len * ov.inner + i] += go[(o * ov.axis + offset2) * ov.inner + i];
                }
                offset2 += len;
            }
        });
    }
    return out;
}

// ---- reductions ---------------------------------------------------------------

namespace detail {

enum class Reduce { Sum, Mean, Max };

inline Tensor reduce(Tape* tape, const Tensor& a, std::size_t axis, Reduce kind,
                     const char* name) {
    if (a.rank() != 2) throw ShapeMismatch(std::string(name) + ": expected rank 2");
    if (axis > 1) throw ShapeMismatch(std::string(name) + ": axis out of range");
    std::size_t rows = a.dim(0), cols = a.dim(1);
    std::size_t slices = axis == 1 ? rows : cols;
    std::size_t len = axis == 1 ? cols : rows;
    auto index = [cols, axis](std::size_t s, std::size_t k) {
        return axis == 1 ? s * cols + k : k * cols + s;
    };
    Tensor out = Tensor::zeros({slices});
    std::vector<std::size_t> argmax(kind == Reduce::Max ? slices : 0);
    for (std::size_t s = 0; s < slices; ++s) {
        if (kind == Reduce::Max) {
            double best = a.data()[index(s, 0)];
            std::size_t bi = 0;
            for (std::size_t k = 1; k < len; ++k) {
                double v = a.data()[index(s, k)];
                if (v > best) {
                    best = v;
                    bi = k;
                }
            }
            out.data()[s] = best;
            argmax[s] = bi;
        } else {
            double sum = 0;
            for (std::size_t k = 0; k < len; ++k) sum += a.data()[index(s, k)];
            out.data()[s] = kind == Reduce::Mean ? sum / static_cast<double>(len) : sum;
        }
    }
    detail::ensure_finite(out, name);
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, slices, len, index, kind, argmax]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t s = 0; s < slices; ++s) {
                double g = go[s];
                if (g == 0.0) continue;
                switch (kind) {
                    case Reduce::Sum:
                        for (std::size_t k = 0; k < len; ++k) ga[index(s, k)] += g;
                        break;
                    case Reduce::Mean:
                        for (std::size_t k = 0; k < len; ++k)
                            ga[index(s, k)] += g / static_cast<double>(len);
                        break;
                    case Reduce::Max: ga[index(s, argmax[s])] += g; break;
                }
            }
        });
    }
    return out;
}

}  // namespace detail

inline Tensor reduce_sum(Tape* t, const Tensor& a, std::size_t axis) {
    return detail::reduce(t, a, axis, detail::Reduce::Sum, "reduce_sum");
}
inline Tensor reduce_mean(Tape* t, const Tensor& a, std::size_t axis) {
    return detail::reduce(t, a, axis, detail::Reduce::Mean, "reduce_mean");
}
inline Tensor reduce_max(Tape* t, const Tensor& a, std::size_t axis) {
    return detail::reduce(t, a, axis, detail::Reduce::Max, "reduce_max");
}

/// Mean over every element, producing a scalar.
inline Tensor reduce_mean(Tape* tape, const Tensor& a) {
    std::size_t n = a.size();
    if (n == 0) throw ShapeMismatch("reduce_mean: empty tensor");
    Tensor out = Tensor::zeros({1});
    double sum = 0;
    for (double v : a.values()) sum += v;
    out.data()[0] = sum / static_cast<double>(n);
    detail::ensure_finite(out, "reduce_mean");
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, n]() mutable {
            double g = oc.grad()[0] / static_cast<double>(n);
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g;
        });
    }
    return out;
}

// ---- gather / dropout ----------------------------------------------------------

/// Rows of `table` at `ids`; the workhorse behind both embeddings and row
/// selection (sort pooling). Backward scatter-adds into the table gradient.
inline Tensor embedding_gather(Tape* tape, const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeMismatch("embedding_gather: table must be rank 2");
    std::size_t width = table.dim(1);
    Tensor out = Tensor::zeros({ids.size(), width});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        int id = ids[r];
        if (id < 0 || static_cast<std::size_t>(id) >= table.dim(0))
            throw ShapeMismatch("embedding_gather: id out of range");
        std::copy_n(table.data() + static_cast<std::size_t>(id) * width, width,
                    out.data() + r * width);
    }
    if (detail::want_grad(tape, {&table})) {
        out.set_requires_grad(true);
        Tensor tc = table, oc = out;
        std::vector<int> idc = ids;
        tape->record([tc, oc, idc, width]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& gt = tc.grad();
            for (std::size_t r = 0; r < idc.size(); ++r)
                for (std::size_t j = 0; j < width; ++j)
                    gt[static_cast<std::size_t>(idc[r]) * width + j] += go[r * width + j];
        });
    }
    return out;
}

/// Inverted dropout: keeps activations scaled by 1/(1-rate) in training
/// mode, identity in eval mode. The mask comes from the caller's stream, so
/// forward passes are deterministic given seeds.
inline Tensor dropout(Tape* tape, const Tensor& a, double rate, bool training, Rng& rng) {
    if (!training || rate <= 0.0) return a;
    if (rate >= 1.0) throw ShapeMismatch("dropout: rate must be < 1");
    std::size_t n = a.size();
    auto mask = std::make_shared<std::vector<double>>(n, 0.0);
    double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform() >= rate) (*mask)[i] = scale;
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * (*mask)[i];
    if (detail::want_grad(tape, {&a})) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        tape->record([ac, oc, mask, n]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * (*mask)[i];
        });
    }
    return out;
}

}  // namespace mrn::num

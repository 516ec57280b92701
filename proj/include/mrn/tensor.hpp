#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "mrn/errors.hpp"

namespace mrn::num {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_volume(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor of 64-bit floats. Copies share the payload, so a
/// Tensor behaves as a cheap handle; the autodiff tape and the optimizer
/// rely on that identity to route gradients and updates.
class Tensor {
public:
    Tensor() : p_(std::make_shared<Payload>()) {}

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : p_(std::make_shared<Payload>()) {
        if (shape_volume(shape) != values.size())
            throw ShapeMismatch("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
        p_->shape = std::move(shape);
        p_->value = std::move(values);
        p_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), {}, requires_grad, 0.0);
    }

    static Tensor full(Shape shape, double fill) {
        return Tensor(std::move(shape), {}, false, fill);
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return p_->shape; }
    std::size_t rank() const { return p_->shape.size(); }
    std::size_t size() const { return p_->value.size(); }
    std::size_t dim(std::size_t axis) const { return p_->shape.at(axis); }

    std::vector<double>& values() { return p_->value; }
    const std::vector<double>& values() const { return p_->value; }
    double* data() { return p_->value.data(); }
    const double* data() const { return p_->value.data(); }

    double item() const {
        if (size() != 1) throw ShapeMismatch("item() on tensor of size " + std::to_string(size()));
        return p_->value[0];
    }

    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool b) { p_->requires_grad = b; }

    /// Accumulated gradient; zeros when nothing reached this tensor.
    std::vector<double>& grad() {
        if (p_->grad.size() != p_->value.size()) p_->grad.assign(p_->value.size(), 0.0);
        return p_->grad;
    }
    const std::vector<double>& grad() const {
        if (p_->grad.size() != p_->value.size()) p_->grad.assign(p_->value.size(), 0.0);
        return p_->grad;
    }

    void zero_grad() { p_->grad.assign(p_->value.size(), 0.0); }

    /// Detached deep copy (used for checkpoint snapshots).
    Tensor clone() const {
        Tensor t(p_->shape, p_->value, p_->requires_grad);
        return t;
    }

    bool same_payload(const Tensor& other) const { return p_ == other.p_; }

private:
    struct Payload {
        Shape shape;
        std::vector<double> value;
        mutable std::vector<double> grad;
        bool requires_grad = false;
    };

    Tensor(Shape shape, std::vector<double>, bool requires_grad, double fill)
        : p_(std::make_shared<Payload>()) {
        p_->shape = std::move(shape);
        p_->value.assign(shape_volume(p_->shape), fill);
        p_->requires_grad = requires_grad;
    }

    std::shared_ptr<Payload> p_;
};

}  // namespace mrn::num

#pragma once

#include <vector>

#include "mrn/tensor.hpp"

namespace mrn::num {

/// SGD with momentum: v <- mu*v + g; theta <- theta - lr*v.
struct OptimizerState {
    double learning_rate = 0.002;
    double momentum = 0.0005;
    std::vector<std::vector<double>> velocity;  // parallel to the parameter list

    void reset(const std::vector<Tensor>& params) {
        velocity.clear();
        for (const Tensor& p : params) velocity.emplace_back(p.size(), 0.0);
    }
};

inline void sgd_step(std::vector<Tensor>& params, OptimizerState& state) {
    if (state.velocity.size() != params.size())
        throw ShapeMismatch("sgd_step: optimizer state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        std::vector<double>& v = state.velocity[i];
        if (v.size() != p.size())
            throw ShapeMismatch("sgd_step: velocity shape does not match parameter shape");
        const std::vector<double>& g = p.grad();
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = state.momentum * v[j] + g[j];
            p.data()[j] -= state.learning_rate * v[j];
        }
    }
}

}  // namespace mrn::num

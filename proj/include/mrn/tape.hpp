#pragma once

#include <functional>
#include <vector>

#include "mrn/errors.hpp"
#include "mrn/tensor.hpp"

namespace mrn::num {

/// Ordered record of executed primitives. Primitives push their backward
/// closures during the forward pass; backward() replays them in reverse,
/// accumulating into Tensor::grad. One backward pass per tape.
class Tape {
public:
    void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }

    std::size_t size() const { return records_.size(); }

    void backward(Tensor loss) {
        if (done_) throw DoubleBackward("backward already ran on this tape");
        done_ = true;
        if (loss.size() != 1)
            throw ShapeMismatch("backward: loss must be a scalar, got shape " +
                                shape_str(loss.shape()));
        loss.grad()[0] += 1.0;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> records_;
    bool done_ = false;
};

}  // namespace mrn::num

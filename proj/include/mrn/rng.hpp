#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mrn {

/// Deterministic random stream. All randomized code in the library draws
/// through this wrapper instead of std distributions, whose outputs are not
/// pinned by the standard; identical seeds give identical streams on every
/// platform we build on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection-free modulo is fine here: n is
    /// always tiny relative to 2^64, so the bias is unobservable.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

    /// Fisher-Yates shuffle with this stream.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derive an independent child stream; used to give each epoch/batch its
    /// own reproducible randomness.
    Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

private:
    std::mt19937_64 gen_;
};

}  // namespace mrn

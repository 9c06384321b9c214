#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace bicnet {

// Seeded RNG wrapper. Substreams derived with derive() keep independent
// concerns (init, data order, synthetic noise) from perturbing each other
// when one of them draws a different amount.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    Rng derive(std::uint64_t stream) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        Rng r(0);
        r.seed_ = seed_ ^ (stream * 0x9e3779b97f4a7c15ull);
        r.eng_.seed(seq);
        return r;
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(eng_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }

    std::uint64_t next_u64() { return eng_(); }

    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        return d(eng_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace bicnet

#pragma once

#include <cstdint>
#include <vector>

namespace peasi {

// Deterministic PRNG (xoshiro256** seeded via splitmix64). Every random draw
// in the project goes through this class so that identical seeds reproduce
// identical artifacts regardless of platform or standard-library version;
// std::shuffle and std::normal_distribution are implementation-defined and
// therefore never used.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform integer in [0, n), unbiased. n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    // Box-Muller; both halves of the pair are consumed for determinism.
    double normal(double mean, double stddev);

    // Normal(0, stddev) re-sampled until within clip_sigmas standard deviations.
    double trunc_normal(double stddev, double clip_sigmas = 2.0);

    // Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent deterministic stream, e.g. one per sub-task.
    Rng fork(std::uint64_t stream);

private:
    std::uint64_t s_[4];
};

}  // namespace peasi

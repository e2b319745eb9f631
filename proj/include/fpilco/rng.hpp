#pragma once

#include <cstdint>
#include <random>

#include "fpilco/linalg.hpp"

namespace fpilco {

/// Seeded random stream. One instance per independent unit of work
/// (episode, restart, oracle) keeps parallel batches reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    Vec normal_vec(int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

    /// Derive an independent stream (splitmix-style) for sub-tasks.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Draws from N(mean, cov) with the transform precomputed once.
/// Accepts singular PSD covariances.
class MvnSampler {
public:
    MvnSampler(Vec mean, const Mat& cov) : mean_(std::move(mean)), transform_(psd_sqrt(cov)) {}

    Vec sample(Rng& rng) const { return mean_ + transform_ * rng.normal_vec(static_cast<int>(mean_.size())); }

private:
    Vec mean_;
    Mat transform_;
};

}  // namespace fpilco

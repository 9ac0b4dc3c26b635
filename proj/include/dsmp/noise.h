#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "dsmp/matrix.h"

namespace dsmp {

/// Brownian increments: one (batch, dim) matrix per time step, each entry N(0, dt).
struct NoiseBatch {
    std::vector<Matrix> increments;
    double dt = 0.0;

    std::size_t steps() const noexcept { return increments.size(); }
    std::size_t batch() const noexcept { return increments.empty() ? 0 : increments.front().rows(); }
    std::size_t dim() const noexcept { return increments.empty() ? 0 : increments.front().cols(); }
};

/// Deterministic 64-bit engine seeded from a list of words through std::seed_seq.
std::mt19937_64 make_engine(std::initializer_list<std::uint64_t> words);

NoiseBatch sample_noise(std::uint64_t seed, std::size_t batch, std::size_t dim, std::size_t steps, double dt);
NoiseBatch sample_noise(std::mt19937_64& engine, std::size_t batch, std::size_t dim, std::size_t steps, double dt);

}  // namespace dsmp

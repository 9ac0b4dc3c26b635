#include "dsmp/noise.h"

#include <cmath>
#include <stdexcept>

namespace dsmp {

std::mt19937_64 make_engine(std::initializer_list<std::uint64_t> words) {
    std::vector<std::uint32_t> seeds;
    seeds.reserve(words.size() * 2);
    for (std::uint64_t w : words) {
        seeds.push_back(static_cast<std::uint32_t>(w & 0xffffffffu));
        seeds.push_back(static_cast<std::uint32_t>(w >> 32));
    }
    std::seed_seq seq(seeds.begin(), seeds.end());
    return std::mt19937_64(seq);
}

NoiseBatch sample_noise(std::mt19937_64& engine, std::size_t batch, std::size_t dim, std::size_t steps, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_noise: dt must be positive");
    if (batch == 0 || dim == 0) throw std::invalid_argument("sample_noise: empty batch");
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    NoiseBatch noise;
    noise.dt = dt;
    noise.increments.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        Matrix m(batch, dim);
        for (double& x : m.values()) x = normal(engine);
        noise.increments.push_back(std::move(m));
    }
    return noise;
}

NoiseBatch sample_noise(std::uint64_t seed, std::size_t batch, std::size_t dim, std::size_t steps, double dt) {
    std::mt19937_64 engine = make_engine({seed});
    return sample_noise(engine, batch, dim, steps, dt);
}

}  // namespace dsmp

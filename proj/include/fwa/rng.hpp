#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fwa/tensor.hpp"

namespace fwa {

using Rng = std::mt19937;

inline void fill_uniform(Tensor& t, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
}

inline void fill_normal(Tensor& t, Rng& rng, float mean = 0.0f, float stddev = 1.0f) {
    std::normal_distribution<float> dist(mean, stddev);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
}

// He-style fan-in init for a weight tensor; fan_in passed explicitly
// because conv and linear layouts differ.
inline void fill_he_normal(Tensor& t, Rng& rng, std::int64_t fan_in) {
    fill_normal(t, rng, 0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
}

inline Tensor random_uniform(std::vector<std::int64_t> shape, Rng& rng, float lo = -1.0f,
                             float hi = 1.0f) {
    Tensor t(std::move(shape));
    fill_uniform(t, rng, lo, hi);
    return t;
}

}  // namespace fwa

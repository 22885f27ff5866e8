#pragma once

// Full-scene Adaptive Window Aggregation: compresses a token sequence
// [B, N, D] into a short key sequence [B, n, D] in a single pass, where n
// scales with the feature-map height instead of being preset. Also the
// adaptive-average-pool baseline it replaces.

#include <cstdint>
#include <string>

#include "fwa/geometry.hpp"
#include "fwa/tensor.hpp"

namespace fwa {

// Key token i aggregates token indices whose residue class mod F falls in
// [i*P_l, (i+1)*P_l); groups of `fold` consecutive key tokens are then
// merged. Every source token is read exactly once; each key token is the
// arithmetic mean of its sources.
inline Tensor fawa_aggregate(const TokenBatch& input) {
    input.validate();
    const PatchGeometry& g = input.geometry;
    const std::int64_t N = input.tokens.dim(1);
    const std::int64_t F = g.chunk_count();
    if (N < F) throw GeometryError("degenerate input: N=" + std::to_string(N) +
                                   " < F=" + std::to_string(F));

    const std::int64_t B = input.tokens.dim(0), D = input.tokens.dim(2);
    const std::int64_t n = g.key_count();
    const std::int64_t group = g.patch_l * g.fold;  // residue classes per key token
    Tensor out({B, n, D});

    // count of source tokens per key token: (N/F) * P_l * fold
    const float inv_count = 1.0f / static_cast<float>((N / F) * group);

    for (std::int64_t b = 0; b < B; ++b) {
        const float* src = input.tokens.data() + b * N * D;
        float* dst = out.data() + b * n * D;
        for (std::int64_t s = 0; s < N; ++s) {
            const std::int64_t key = (s % F) / group;
            const float* tok = src + s * D;
            float* acc = dst + key * D;
            for (std::int64_t c = 0; c < D; ++c) acc[c] += tok[c];
        }
        for (std::int64_t i = 0; i < n * D; ++i) dst[i] *= inv_count;
    }

    counters::fawa_invocations += 1;
    counters::fawa_elements_read += static_cast<std::uint64_t>(B * N * D);
    return out;
}

// Pooling baseline: restore the token sequence to its feature map,
// adaptive-average-pool to g x g, and re-serialize. out_tokens must be a
// perfect square whose root divides both map dimensions.
inline Tensor pool_aggregate_baseline(const TokenBatch& input, std::int64_t out_tokens) {
    input.validate();
    std::int64_t g = 0;
    while ((g + 1) * (g + 1) <= out_tokens) ++g;
    if (g * g != out_tokens)
        throw GeometryError("pool baseline: out_tokens " + std::to_string(out_tokens) +
                            " is not a perfect square");
    const std::int64_t H = input.geometry.feat_h, W = input.geometry.feat_w;
    if (H % g != 0 || W % g != 0)
        throw GeometryError("pool baseline: grid " + std::to_string(g) +
                            " does not divide map " + std::to_string(H) + "x" +
                            std::to_string(W));

    const Tensor map = deserialize(input);  // [B, D, H, W]
    const std::int64_t B = map.dim(0), D = map.dim(1);
    const std::int64_t bh = H / g, bw = W / g;
    Tensor pooled({B, D, g, g});
    const float inv = 1.0f / static_cast<float>(bh * bw);
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < D; ++c) {
            const float* src = map.data() + (b * D + c) * H * W;
            float* dst = pooled.data() + (b * D + c) * g * g;
            for (std::int64_t oy = 0; oy < g; ++oy)
                for (std::int64_t ox = 0; ox < g; ++ox) {
                    float acc = 0.0f;
                    for (std::int64_t y = oy * bh; y < (oy + 1) * bh; ++y)
                        for (std::int64_t x = ox * bw; x < (ox + 1) * bw; ++x)
                            acc += src[y * W + x];
                    dst[oy * g + ox] = acc * inv;
                }
        }

    PatchGeometry pg{g, g, 1, 1, 1};
    return serialize(pooled, pg).tokens;  // [B, g*g, D]
}

}  // namespace fwa

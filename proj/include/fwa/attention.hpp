#pragma once

// Attention operators: FWA (DReLu-weighted attention over the short FAWA
// key sequence, with key-sequence caching across stacked layers) plus the
// SoftMax MHSA and pooled-key baselines. All multi-head.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "fwa/fawa.hpp"
#include "fwa/geometry.hpp"
#include "fwa/rng.hpp"
#include "fwa/tensor.hpp"

namespace fwa {

struct FwaConfig {
    int heads = 4;
    int head_dim = 0;     // d, the per-head scaling base
    float dp = 0.5f;      // DReLu scale parameter
    float eps = 1e-6f;
    PatchGeometry geometry;

    std::int64_t model_dim() const { return static_cast<std::int64_t>(heads) * head_dim; }

    void validate() const {
        if (heads <= 0 || head_dim <= 0) throw ShapeError("FwaConfig: bad head layout");
        if (dp + eps <= 0.0f) throw ShapeError("FwaConfig: dp + eps must be positive");
        geometry.validate();
    }
};

// FAWA output cached at a block's first transformer layer; later layers
// re-project it instead of re-aggregating. The fingerprint pins geometry,
// batch and channel count so a cache never silently crosses shapes.
struct KeyCache {
    Tensor aggregated;  // [B, n, model_dim]
    std::string valid_for;

    static std::string fingerprint(const PatchGeometry& g, std::int64_t batch,
                                   std::int64_t model_dim) {
        return g.fingerprint() + "/b" + std::to_string(batch) + "/c" + std::to_string(model_dim);
    }
};

// DReLu weighting: relu(x) / ((dp + eps) * L), L = key-sequence length.
inline Tensor drelu(const Tensor& scores, std::int64_t key_len, float dp, float eps) {
    if (key_len <= 0) throw ShapeError("drelu: key_len must be positive");
    if (scores.dim(-1) != key_len)
        throw ShapeError("drelu: key_len " + std::to_string(key_len) +
                         " != score row length " + std::to_string(scores.dim(-1)));
    const float inv = 1.0f / ((dp + eps) * static_cast<float>(key_len));
    Tensor out = scores;
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out[i] = out[i] > 0.0f ? out[i] * inv : 0.0f;
    return out;
}

inline Tensor drelu(const Tensor& scores, std::int64_t key_len, const FwaConfig& cfg) {
    return drelu(scores, key_len, cfg.dp, cfg.eps);
}

// ---- head plumbing --------------------------------------------------------

inline Tensor split_heads(const Tensor& x, int heads) {
    const std::int64_t B = x.dim(0), N = x.dim(1), dm = x.dim(2);
    if (dm % heads != 0) throw ShapeError("split_heads: model_dim not divisible by heads");
    const std::int64_t hd = dm / heads;
    Tensor out({B * heads, N, hd});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t i = 0; i < N; ++i) {
                const float* src = x.data() + (b * N + i) * dm + h * hd;
                float* dst = out.data() + ((b * heads + h) * N + i) * hd;
                std::copy(src, src + hd, dst);
            }
    return out;
}

inline Tensor merge_heads(const Tensor& x, int heads) {
    const std::int64_t Bh = x.dim(0), N = x.dim(1), hd = x.dim(2);
    const std::int64_t B = Bh / heads;
    Tensor out({B, N, hd * heads});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t i = 0; i < N; ++i) {
                const float* src = x.data() + ((b * heads + h) * N + i) * hd;
                float* dst = out.data() + (b * N + i) * hd * heads + h * hd;
                std::copy(src, src + hd, dst);
            }
    return out;
}

// ---- attention cores ------------------------------------------------------
// Cores take already-projected Q [B,N,dm] and K,V [B,n,dm], loop heads and
// apply the chosen weighting. Only the QK^T and weight*V products feed the
// MAC counter, so counter growth in N is exactly quadratic (SoftMax, n=N)
// or linear (DReLu, fixed n).

enum class Weighting { SoftMax, DReLu };

inline Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                             Weighting weighting, float dp = 0.5f, float eps = 1e-6f) {
    const std::int64_t N = q.dim(1), n = k.dim(1), dm = q.dim(2);
    if (k.dim(2) != dm || v.dim(2) != dm || v.dim(1) != n)
        throw ShapeError("attention_core: q/k/v shape mismatch");
    const std::int64_t hd = dm / heads;
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(hd));

    const Tensor qh = split_heads(q, heads);
    const Tensor kh = split_heads(k, heads);
    const Tensor vh = split_heads(v, heads);

    Tensor scores = matmul(qh, transpose_last2(kh));  // [B*h, N, n]
    scores = scale(scores, inv_sqrt_d);
    Tensor weights = (weighting == Weighting::SoftMax) ? softmax_lastdim(scores)
                                                       : drelu(scores, n, dp, eps);
    Tensor out = matmul(weights, vh);  // [B*h, N, hd]

    counters::attention_core_macs +=
        static_cast<std::uint64_t>(qh.dim(0)) * static_cast<std::uint64_t>(N) *
        static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(hd) * 2u;

    return merge_heads(out, heads);
}

// ---- FWA ------------------------------------------------------------------

// Per-layer weights: query projection plus the 1x1 "conv" mapping the
// aggregated key sequence to 2*model_dim channels, split evenly into
// FWA_K and FWA_V.
struct FwaLayerWeights {
    Tensor wq;   // [dm, dm]
    Tensor bq;   // [dm]
    Tensor wkv;  // [dm, 2*dm]
    Tensor bkv;  // [2*dm]
};

inline FwaLayerWeights make_fwa_layer_weights(std::int64_t dm, Rng& rng) {
    FwaLayerWeights w{Tensor({dm, dm}), Tensor({dm}), Tensor({dm, 2 * dm}), Tensor({2 * dm})};
    fill_he_normal(w.wq, rng, dm);
    fill_he_normal(w.wkv, rng, dm);
    return w;
}

struct FwaOutput {
    Tensor output;   // [B, N, model_dim]
    KeyCache cache;  // the FAWA result used by this layer
};

// One FWA attention layer. With no cache (layer 1) the key sequence is
// aggregated from the input; with a cache (layers >= 2) FAWA is skipped
// and the cached sequence is re-projected by this layer's own weights.
inline FwaOutput fwa_attention(const TokenBatch& query_tokens, const FwaConfig& cfg,
                               const FwaLayerWeights& weights,
                               const KeyCache* cache = nullptr) {
    cfg.validate();
    query_tokens.validate();
    const std::int64_t dm = cfg.model_dim();
    if (query_tokens.tokens.dim(2) != dm)
        throw ShapeError("fwa_attention: token dim " + std::to_string(query_tokens.tokens.dim(2)) +
                         " != model_dim " + std::to_string(dm));

    const std::string fp = KeyCache::fingerprint(query_tokens.geometry,
                                                 query_tokens.tokens.dim(0), dm);
    Tensor aggregated;
    if (cache) {
        if (cache->valid_for != fp)
            throw ShapeError("fwa_attention: cache fingerprint mismatch (" + cache->valid_for +
                             " vs " + fp + ")");
        aggregated = cache->aggregated;
    } else {
        aggregated = fawa_aggregate(query_tokens);
    }

    Tensor q = add_bias_lastdim(matmul(query_tokens.tokens, weights.wq), weights.bq);
    Tensor kv = add_bias_lastdim(matmul(aggregated, weights.wkv), weights.bkv);
    std::vector<Tensor> split = chunk(kv, -1, 2);
    const std::int64_t n = aggregated.dim(1);
    Tensor out = attention_core(q, split[0], split[1], cfg.heads, Weighting::DReLu, cfg.dp,
                                cfg.eps);
    (void)n;
    return FwaOutput{std::move(out), KeyCache{std::move(aggregated), fp}};
}

// ---- baselines ------------------------------------------------------------

struct MhsaWeights {
    Tensor wq, bq;  // [dm, dm], [dm]
    Tensor wk, bk;
    Tensor wv, bv;
};

inline MhsaWeights make_mhsa_weights(std::int64_t dm, Rng& rng) {
    MhsaWeights w{Tensor({dm, dm}), Tensor({dm}), Tensor({dm, dm}),
                  Tensor({dm}),     Tensor({dm, dm}), Tensor({dm})};
    fill_he_normal(w.wq, rng, dm);
    fill_he_normal(w.wk, rng, dm);
    fill_he_normal(w.wv, rng, dm);
    return w;
}

inline Tensor mhsa_baseline(const Tensor& tokens, int heads, const MhsaWeights& w) {
    if (tokens.rank() != 3) throw ShapeError("mhsa_baseline expects [B,N,dm]");
    if (tokens.dim(2) % heads != 0)
        throw ShapeError("mhsa_baseline: model_dim not divisible by heads");
    Tensor q = add_bias_lastdim(matmul(tokens, w.wq), w.bq);
    Tensor k = add_bias_lastdim(matmul(tokens, w.wk), w.bk);
    Tensor v = add_bias_lastdim(matmul(tokens, w.wv), w.bv);
    return attention_core(q, k, v, heads, Weighting::SoftMax);
}

// K and V come from the pooled (fixed-length) token sequence; Q keeps full
// resolution. SoftMax weighting throughout.
inline Tensor pooled_key_attention_baseline(const TokenBatch& tokens, std::int64_t agent_tokens,
                                            int heads, const MhsaWeights& w) {
    tokens.validate();
    Tensor pooled = pool_aggregate_baseline(tokens, agent_tokens);
    Tensor q = add_bias_lastdim(matmul(tokens.tokens, w.wq), w.bq);
    Tensor k = add_bias_lastdim(matmul(pooled, w.wk), w.bk);
    Tensor v = add_bias_lastdim(matmul(pooled, w.wv), w.bv);
    return attention_core(q, k, v, heads, Weighting::SoftMax);
}

}  // namespace fwa

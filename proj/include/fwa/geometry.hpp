#pragma once

// Feature-map <-> token-sequence geometry. The serializer commits to
// row-major pixel order; the window aggregation in fawa.hpp relies on
// exactly this layout.

#include <cstdint>
#include <string>

#include "fwa/tensor.hpp"

namespace fwa {

struct GeometryError : ShapeError {
    explicit GeometryError(const std::string& msg) : ShapeError(msg) {}
};

struct PatchGeometry {
    std::int64_t feat_h = 0;  // feature-map height (the paper's "length")
    std::int64_t feat_w = 0;  // feature-map width I_w
    std::int64_t patch_l = 1;  // P_l
    std::int64_t patch_w = 1;  // P_w
    std::int64_t fold = 1;     // secondary compression factor

    std::int64_t chunk_count() const { return feat_h / patch_l; }          // F
    std::int64_t base_keys() const { return chunk_count() / patch_l; }     // n0
    std::int64_t key_count() const { return base_keys() / fold; }          // n
    std::int64_t tokens() const { return feat_h * feat_w; }                // N

    void validate() const {
        if (feat_h <= 0 || feat_w <= 0 || patch_l <= 0 || patch_w <= 0 || fold <= 0)
            throw GeometryError("geometry fields must be positive");
        if (feat_h % patch_l != 0)
            throw GeometryError("feat_h " + std::to_string(feat_h) +
                                " not divisible by patch_l " + std::to_string(patch_l));
        if (feat_w % patch_w != 0)
            throw GeometryError("feat_w " + std::to_string(feat_w) +
                                " not divisible by patch_w " + std::to_string(patch_w));
        const std::int64_t f = chunk_count();
        if (f % patch_l != 0)
            throw GeometryError("chunk count F=" + std::to_string(f) +
                                " not divisible by patch_l " + std::to_string(patch_l));
        if (base_keys() % fold != 0)
            throw GeometryError("base key count " + std::to_string(base_keys()) +
                                " not divisible by fold " + std::to_string(fold));
    }

    std::string fingerprint() const {
        return std::to_string(feat_h) + "x" + std::to_string(feat_w) + "/p" +
               std::to_string(patch_l) + "x" + std::to_string(patch_w) + "/f" +
               std::to_string(fold);
    }

    bool operator==(const PatchGeometry&) const = default;
};

// Serialized patch sequence [B, N, D] plus its originating geometry.
struct TokenBatch {
    Tensor tokens;  // [B, N, D]
    PatchGeometry geometry;

    void validate() const {
        geometry.validate();
        if (tokens.rank() != 3)
            throw GeometryError("TokenBatch tokens must be [B,N,D], got " +
                                shape_str(tokens.shape()));
        if (tokens.dim(1) != geometry.tokens())
            throw GeometryError("token count " + std::to_string(tokens.dim(1)) +
                                " != feat_h*feat_w = " + std::to_string(geometry.tokens()));
    }
};

// [B,C,H,W] -> [B, H*W, C], one token per pixel in row-major pixel order.
inline TokenBatch serialize(const Tensor& feature_map, PatchGeometry geom) {
    if (feature_map.rank() != 4)
        throw GeometryError("serialize expects [B,C,H,W], got " + shape_str(feature_map.shape()));
    const std::int64_t B = feature_map.dim(0), C = feature_map.dim(1);
    const std::int64_t H = feature_map.dim(2), W = feature_map.dim(3);
    geom.feat_h = H;
    geom.feat_w = W;
    geom.validate();

    Tensor tokens({B, H * W, C});
    for (std::int64_t b = 0; b < B; ++b) {
        const float* src = feature_map.data() + b * C * H * W;
        float* dst = tokens.data() + b * H * W * C;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t p = 0; p < H * W; ++p) dst[p * C + c] = src[c * H * W + p];
    }
    return TokenBatch{std::move(tokens), geom};
}

inline Tensor deserialize(const TokenBatch& batch) {
    batch.validate();
    const std::int64_t B = batch.tokens.dim(0), C = batch.tokens.dim(2);
    const std::int64_t H = batch.geometry.feat_h, W = batch.geometry.feat_w;
    Tensor map({B, C, H, W});
    for (std::int64_t b = 0; b < B; ++b) {
        const float* src = batch.tokens.data() + b * H * W * C;
        float* dst = map.data() + b * C * H * W;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t p = 0; p < H * W; ++p) dst[c * H * W + p] = src[p * C + c];
    }
    return map;
}

}  // namespace fwa

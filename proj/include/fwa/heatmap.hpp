#pragma once

// Synthetic heart-shaped feature map demo: one attention layer's weight
// row for a fixed query pixel, computed per channel under DReLu and under
// SoftMax, written as grayscale PGM images plus a JSON sidecar with the
// per-image scaling.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwa/attention.hpp"
#include "fwa/geometry.hpp"
#include "fwa/rng.hpp"
#include "fwa/tensor.hpp"

namespace fwa {

// ASCII PGM (P2), one value per pixel row-major.
inline void write_pgm(const std::string& path, const std::vector<int>& pixels, std::int64_t w,
                      std::int64_t h) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "P2\n" << w << ' ' << h << "\n255\n";
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            if (x) os << ' ';
            os << pixels[static_cast<std::size_t>(y * w + x)];
        }
        os << '\n';
    }
}

struct HeatmapOptions {
    std::int64_t side = 20;
    std::int64_t channels = 4;
    float noise = 0.05f;
    float dp = 0.5f;
    float eps = 1e-6f;
    std::uint32_t seed = 42;
    std::int64_t query_row = -1;  // -1 = grid center
    std::int64_t query_col = -1;
    std::string out_dir = ".";
};

struct HeatmapResult {
    std::vector<std::string> files;
    // exact-zero pixel counts per written image, same order as files
    std::vector<std::int64_t> zero_counts;
};

// Heart region by the implicit curve (x^2 + y^2 - 1)^3 <= x^2 * y^3 on a
// [-1.5, 1.5]^2 grid; channel c is (c+1)/channels inside and 0 outside,
// plus seeded uniform noise.
inline Tensor heart_feature_map(const HeatmapOptions& opt) {
    Tensor map({1, opt.channels, opt.side, opt.side});
    Rng rng(opt.seed);
    std::uniform_real_distribution<float> noise(-opt.noise, opt.noise);
    for (std::int64_t c = 0; c < opt.channels; ++c) {
        const float inside_val = static_cast<float>(c + 1) / static_cast<float>(opt.channels);
        for (std::int64_t row = 0; row < opt.side; ++row) {
            const double y = 1.5 - 3.0 * (static_cast<double>(row) + 0.5) /
                                       static_cast<double>(opt.side);
            for (std::int64_t col = 0; col < opt.side; ++col) {
                const double x = -1.5 + 3.0 * (static_cast<double>(col) + 0.5) /
                                            static_cast<double>(opt.side);
                const double lhs = std::pow(x * x + y * y - 1.0, 3.0);
                const double rhs = x * x * y * y * y;
                const bool inside = lhs <= rhs;
                float v = inside ? inside_val : 0.0f;
                if (opt.noise > 0.0f) v += noise(rng);
                map[(c * opt.side + row) * opt.side + col] = v;
            }
        }
    }
    return map;
}

inline HeatmapResult run_heatmap_demo(const HeatmapOptions& opt) {
    const std::int64_t side = opt.side, ch = opt.channels, n = side * side;
    Tensor map = heart_feature_map(opt);
    TokenBatch batch = serialize(map, PatchGeometry{side, side, 1, 1, 1});

    const std::int64_t qr = opt.query_row >= 0 ? opt.query_row : side / 2;
    const std::int64_t qc = opt.query_col >= 0 ? opt.query_col : side / 2;
    if (qr >= side || qc >= side) throw std::runtime_error("heatmap query pixel out of range");
    const std::int64_t q = qr * side + qc;

    HeatmapResult res;
    nlohmann::json sidecar;
    sidecar["grid"] = side;
    sidecar["query_row"] = qr;
    sidecar["query_col"] = qc;
    sidecar["noise"] = opt.noise;
    sidecar["seed"] = opt.seed;
    nlohmann::json images = nlohmann::json::object();

    // Each channel acts as its own single-dimension head: the query
    // pixel's score against key i is q_c * k_i_c (d = 1, so no scaling).
    for (std::int64_t c = 0; c < ch; ++c) {
        Tensor scores({1, 1, n});
        const float qv = batch.tokens[q * ch + c];
        for (std::int64_t i = 0; i < n; ++i) scores[i] = qv * batch.tokens[i * ch + c];

        const Tensor w_drelu = drelu(scores, n, opt.dp, opt.eps);
        const Tensor w_softmax = softmax_lastdim(scores);

        for (int method = 0; method < 2; ++method) {
            const Tensor& w = method == 0 ? w_drelu : w_softmax;
            const std::string mname = method == 0 ? "drelu" : "softmax";
            float mn = w[0], mx = w[0];
            std::int64_t zeros = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                mn = std::min(mn, w[i]);
                mx = std::max(mx, w[i]);
                if (w[i] == 0.0f) ++zeros;
            }
            const float range = mx - mn;
            std::vector<int> pixels(static_cast<std::size_t>(n), 0);
            for (std::int64_t i = 0; i < n; ++i)
                pixels[static_cast<std::size_t>(i)] =
                    range > 0.0f
                        ? static_cast<int>(std::lround(255.0f * (w[i] - mn) / range))
                        : 0;

            const std::string fname =
                "heatmap_" + mname + "_ch" + std::to_string(c + 1) + ".pgm";
            write_pgm(opt.out_dir + "/" + fname, pixels, side, side);
            res.files.push_back(fname);
            res.zero_counts.push_back(zeros);
            images[fname] = {{"min", mn}, {"max", mx}, {"exact_zero_weights", zeros}};
        }
    }

    sidecar["images"] = images;
    std::ofstream js(opt.out_dir + "/heatmap_scales.json");
    if (!js) throw std::runtime_error("cannot write heatmap_scales.json");
    js << sidecar.dump(2) << '\n';
    res.files.push_back("heatmap_scales.json");
    res.zero_counts.push_back(0);
    return res;
}

}  // namespace fwa

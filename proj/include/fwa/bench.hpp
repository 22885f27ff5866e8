#pragma once

// Single-threaded wall-clock and allocation benchmarking: the repeated
// transformer study, the FAWA-vs-pooling sweep, and the complexity sweep
// over sequence length. Emits CSV and JSON (schema_version 1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwa/attention.hpp"
#include "fwa/backbone.hpp"
#include "fwa/fawa.hpp"
#include "fwa/geometry.hpp"
#include "fwa/rng.hpp"
#include "fwa/tensor.hpp"

namespace fwa {

struct BenchRecord {
    std::string scenario;
    std::string mechanism;  // FWA, FWA_cached, MHSA, PooledKey, FAWA_op, Pool_op
    std::string shape;
    int repeat = 1;
    int iters = 0;
    double wall_ms_med = 0.0;
    double wall_ms_p10 = 0.0;
    double wall_ms_p90 = 0.0;
    std::int64_t peak_bytes = 0;
};

struct BenchPlan {
    int warmup = 2;
    int iters = 9;
    std::uint32_t seed = 42;
    std::vector<int> repeats{1, 2, 4, 8};
    bool paper_scale = false;   // attention_repeat: [128,96,32,32] instead of [8,96,32,32]
    std::int64_t base = 640;    // fawa_vs_pool base resolution
    std::vector<std::int64_t> seq_lens{256, 1024, 4096};

    void validate() const {
        if (warmup < 2) throw ShapeError("bench plan: warmup must be >= 2");
        if (iters < 5) throw ShapeError("bench plan: iters must be >= 5");
    }
};

// The harness is strictly single-threaded; refuse to run if the caller
// asked for internal parallelism.
inline void require_single_thread() {
    const char* env = std::getenv("FWA_KIT_THREADS");
    if (env && std::string(env) != "1")
        throw std::runtime_error("benchmarks require FWA_KIT_THREADS=1 or unset, got '" +
                                 std::string(env) + "'");
}

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline double timer_granularity_ms() {
    using clock = std::chrono::steady_clock;
    double best = 1e9;
    for (int i = 0; i < 200; ++i) {
        auto a = clock::now();
        auto b = clock::now();
        while (b == a) b = clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(b - a).count());
    }
    return best;
}

// Runs warmups then timed iterations; fills the timing and peak fields.
inline void time_into(BenchRecord& rec, int warmup, int iters,
                      const std::function<void()>& fn) {
    using clock = std::chrono::steady_clock;
    for (int i = 0; i < warmup; ++i) fn();
    counters::reset_peak();
    std::vector<double> ms;
    ms.reserve(static_cast<std::size_t>(iters));
    for (int i = 0; i < iters; ++i) {
        const auto t0 = clock::now();
        fn();
        const auto t1 = clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    rec.iters = iters;
    rec.wall_ms_med = percentile(ms, 0.5);
    rec.wall_ms_p10 = percentile(ms, 0.1);
    rec.wall_ms_p90 = percentile(ms, 0.9);
    rec.peak_bytes = counters::peak_tensor_bytes.load();

    static const double gran = timer_granularity_ms();
    if (rec.wall_ms_med < 20.0 * gran)
        std::cerr << "warning: " << rec.scenario << "/" << rec.mechanism
                  << " median " << rec.wall_ms_med << " ms is below 20x timer granularity ("
                  << gran << " ms)\n";
}

inline std::string dims_str(const std::vector<std::int64_t>& dims) { return shape_str(dims); }

// Nearest g with g^2 tokens such that g divides both map dims.
inline std::int64_t nearest_pool_grid(std::int64_t h, std::int64_t w, std::int64_t want_tokens) {
    std::int64_t best = 1;
    double best_d = 1e18;
    for (std::int64_t g = 1; g <= std::min(h, w); ++g) {
        if (h % g != 0 || w % g != 0) continue;
        const double d = std::abs(static_cast<double>(g * g - want_tokens));
        if (d < best_d) {
            best_d = d;
            best = g;
        }
    }
    return best;
}

}  // namespace detail

// ---- scenario: attention_repeat -------------------------------------------

inline std::vector<BenchRecord> run_attention_repeat(const BenchPlan& plan) {
    require_single_thread();
    plan.validate();

    const std::int64_t B = plan.paper_scale ? 128 : 8;
    const std::int64_t C = 96, H = 32, W = 32;
    const std::string shape = detail::dims_str({B, C, H, W});

    Rng rng(plan.seed);
    Tensor map = random_uniform({B, C, H, W}, rng);
    PatchGeometry geom{H, W, 1, 1, 1};
    TokenBatch batch = serialize(map, geom);

    FwaConfig cfg;
    cfg.heads = 4;
    cfg.head_dim = static_cast<int>(C / 4);
    cfg.geometry = batch.geometry;

    const int max_repeat = *std::max_element(plan.repeats.begin(), plan.repeats.end());
    std::vector<FwaLayerWeights> fwa_w;
    std::vector<MhsaWeights> mhsa_w;
    for (int i = 0; i < max_repeat; ++i) {
        fwa_w.push_back(make_fwa_layer_weights(C, rng));
        mhsa_w.push_back(make_mhsa_weights(C, rng));
    }
    const std::int64_t pool_grid = detail::nearest_pool_grid(H, W, geom.key_count());
    const std::int64_t agent_tokens = pool_grid * pool_grid;

    std::vector<BenchRecord> out;
    for (int rep : plan.repeats) {
        BenchRecord mhsa{"attention_repeat", "MHSA", shape, rep};
        detail::time_into(mhsa, plan.warmup, plan.iters, [&] {
            Tensor t = batch.tokens;
            for (int l = 0; l < rep; ++l) t = mhsa_baseline(t, cfg.heads, mhsa_w[l]);
        });
        out.push_back(mhsa);

        BenchRecord fwa{"attention_repeat", "FWA", shape, rep};
        detail::time_into(fwa, plan.warmup, plan.iters, [&] {
            Tensor t = batch.tokens;
            for (int l = 0; l < rep; ++l) {
                FwaOutput r = fwa_attention(TokenBatch{t, batch.geometry}, cfg, fwa_w[l]);
                t = std::move(r.output);
            }
        });
        out.push_back(fwa);

        BenchRecord cached{"attention_repeat", "FWA_cached", shape, rep};
        detail::time_into(cached, plan.warmup, plan.iters, [&] {
            Tensor t = batch.tokens;
            KeyCache cache;
            for (int l = 0; l < rep; ++l) {
                FwaOutput r = fwa_attention(TokenBatch{t, batch.geometry}, cfg, fwa_w[l],
                                            l == 0 ? nullptr : &cache);
                cache = std::move(r.cache);
                t = std::move(r.output);
            }
        });
        out.push_back(cached);

        BenchRecord pooled{"attention_repeat", "PooledKey", shape, rep};
        detail::time_into(pooled, plan.warmup, plan.iters, [&] {
            Tensor t = batch.tokens;
            for (int l = 0; l < rep; ++l)
                t = pooled_key_attention_baseline(TokenBatch{t, batch.geometry}, agent_tokens,
                                                  cfg.heads, mhsa_w[l]);
        });
        out.push_back(pooled);
    }
    return out;
}

// ---- scenario: fawa_vs_pool -----------------------------------------------

inline std::vector<BenchRecord> run_fawa_vs_pool(const BenchPlan& plan) {
    require_single_thread();
    plan.validate();

    const std::int64_t C = 96, B = 1;
    const std::int64_t divisors[3] = {8, 16, 32};
    const std::int64_t folds[3] = {1, 2, 4};

    Rng rng(plan.seed);
    std::vector<BenchRecord> out;
    double fawa_total = 0.0, pool_total = 0.0;

    for (int layer = 0; layer < 3; ++layer) {
        const std::int64_t hw = plan.base / divisors[layer];
        PatchGeometry geom{hw, hw, 1, 1, 1};
        geom.fold = effective_fold(geom.base_keys(), folds[layer]);
        Tensor map = random_uniform({B, C, hw, hw}, rng);
        TokenBatch batch = serialize(map, geom);
        const std::string shape = detail::dims_str({B, C, hw, hw});

        BenchRecord fawa{"fawa_vs_pool", "FAWA_op", shape, layer + 1};
        detail::time_into(fawa, plan.warmup, plan.iters, [&] {
            Tensor keys = fawa_aggregate(batch);
            (void)keys;
        });
        out.push_back(fawa);
        fawa_total += fawa.wall_ms_med;

        const std::int64_t g = detail::nearest_pool_grid(hw, hw, geom.key_count());
        BenchRecord pool{"fawa_vs_pool", "Pool_op", shape, layer + 1};
        detail::time_into(pool, plan.warmup, plan.iters, [&] {
            Tensor keys = pool_aggregate_baseline(batch, g * g);
            (void)keys;
        });
        out.push_back(pool);
        pool_total += pool.wall_ms_med;
    }

    BenchRecord ft{"fawa_vs_pool", "FAWA_op", "total", 0, plan.iters, fawa_total, fawa_total,
                   fawa_total, 0};
    BenchRecord pt{"fawa_vs_pool", "Pool_op", "total", 0, plan.iters, pool_total, pool_total,
                   pool_total, 0};
    out.push_back(ft);
    out.push_back(pt);
    return out;
}

// ---- scenario: complexity_sweep -------------------------------------------

// Least-squares slope of log(y) against log(x).
inline double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

struct ComplexityResult {
    std::vector<BenchRecord> records;
    double wall_exponent_mhsa = 0.0;
    double wall_exponent_fwa = 0.0;
    double mac_exponent_mhsa = 0.0;
    double mac_exponent_fwa = 0.0;
    std::int64_t peak_bytes_mhsa_max_n = 0;
    std::int64_t peak_bytes_fwa_max_n = 0;
};

// Times the attention cores themselves (pre-projected Q/K/V) so the MAC
// counter exponents stay analytic: keys for FWA are folded to a constant
// n = 16 across the sweep.
inline ComplexityResult run_complexity_sweep(const BenchPlan& plan) {
    require_single_thread();
    plan.validate();

    const std::int64_t dm = 64;
    const int heads = 4;
    const std::int64_t fixed_keys = 16;

    Rng rng(plan.seed);
    ComplexityResult res;
    std::vector<double> ns, mhsa_ms, fwa_ms, mhsa_macs, fwa_macs;

    for (std::int64_t N : plan.seq_lens) {
        std::int64_t side = 1;
        while (side * side < N) ++side;
        if (side * side != N)
            throw ShapeError("complexity sweep: N=" + std::to_string(N) +
                             " is not a square map size");
        PatchGeometry geom{side, side, 1, 1, side / fixed_keys};
        geom.validate();

        Tensor q = random_uniform({1, N, dm}, rng);
        Tensor map = random_uniform({1, dm, side, side}, rng);
        TokenBatch batch = serialize(map, geom);
        const std::string shape = detail::dims_str({1, N, dm});

        BenchRecord mhsa{"complexity_sweep", "MHSA", shape, static_cast<int>(N)};
        counters::reset_op_counters();
        detail::time_into(mhsa, plan.warmup, plan.iters, [&] {
            Tensor o = attention_core(q, q, q, heads, Weighting::SoftMax);
            (void)o;
        });
        const double mhsa_mac =
            static_cast<double>(counters::attention_core_macs.load()) /
            static_cast<double>(plan.warmup + plan.iters);
        res.records.push_back(mhsa);
        if (N == plan.seq_lens.back()) res.peak_bytes_mhsa_max_n = mhsa.peak_bytes;

        BenchRecord fwa{"complexity_sweep", "FWA", shape, static_cast<int>(N)};
        counters::reset_op_counters();
        detail::time_into(fwa, plan.warmup, plan.iters, [&] {
            Tensor keys = fawa_aggregate(batch);
            Tensor o = attention_core(q, keys, keys, heads, Weighting::DReLu);
            (void)o;
        });
        const double fwa_mac = static_cast<double>(counters::attention_core_macs.load()) /
                               static_cast<double>(plan.warmup + plan.iters);
        res.records.push_back(fwa);
        if (N == plan.seq_lens.back()) res.peak_bytes_fwa_max_n = fwa.peak_bytes;

        ns.push_back(static_cast<double>(N));
        mhsa_ms.push_back(mhsa.wall_ms_med);
        fwa_ms.push_back(fwa.wall_ms_med);
        mhsa_macs.push_back(mhsa_mac);
        fwa_macs.push_back(fwa_mac);
    }

    res.wall_exponent_mhsa = fit_exponent(ns, mhsa_ms);
    res.wall_exponent_fwa = fit_exponent(ns, fwa_ms);
    res.mac_exponent_mhsa = fit_exponent(ns, mhsa_macs);
    res.mac_exponent_fwa = fit_exponent(ns, fwa_macs);
    return res;
}

// ---- output ---------------------------------------------------------------

inline void write_csv(const std::vector<BenchRecord>& records, std::ostream& os) {
    os << "scenario,mechanism,shape,repeat,iters,wall_ms_med,wall_ms_p10,wall_ms_p90,"
          "peak_bytes\n";
    for (const BenchRecord& r : records)
        os << r.scenario << ',' << r.mechanism << ',' << '"' << r.shape << '"' << ',' << r.repeat
           << ',' << r.iters << ',' << r.wall_ms_med << ',' << r.wall_ms_p10 << ','
           << r.wall_ms_p90 << ',' << r.peak_bytes << '\n';
}

inline nlohmann::json records_json(const std::vector<BenchRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const BenchRecord& r : records) {
        nlohmann::json j;
        j["scenario"] = r.scenario;
        j["mechanism"] = r.mechanism;
        j["shape"] = r.shape;
        j["repeat"] = r.repeat;
        j["iters"] = r.iters;
        j["wall_ms_med"] = r.wall_ms_med;
        j["wall_ms_p10"] = r.wall_ms_p10;
        j["wall_ms_p90"] = r.wall_ms_p90;
        j["peak_bytes"] = r.peak_bytes;
        arr.push_back(j);
    }
    nlohmann::json out;
    out["schema_version"] = 1;
    out["records"] = arr;
    return out;
}

inline void write_outputs(const std::vector<BenchRecord>& records, const std::string& dir,
                          const std::string& name, const nlohmann::json& extra = {}) {
    {
        std::ofstream csv(dir + "/" + name + ".csv");
        if (!csv) throw std::runtime_error("cannot write " + dir + "/" + name + ".csv");
        write_csv(records, csv);
    }
    nlohmann::json j = records_json(records);
    if (!extra.is_null() && !extra.empty())
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream js(dir + "/" + name + ".json");
    if (!js) throw std::runtime_error("cannot write " + dir + "/" + name + ".json");
    js << j.dump(2) << '\n';
}

}  // namespace fwa

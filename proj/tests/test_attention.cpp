#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fwa/attention.hpp"
#include "fwa/rng.hpp"

using namespace fwa;

namespace {

// Double-precision softmax attention reference over pre-projected q/k/v,
// single head.
Tensor softmax_attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v) {
    const std::int64_t N = q.dim(1), n = k.dim(1), d = q.dim(2);
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out({1, N, d});
    for (std::int64_t i = 0; i < N; ++i) {
        std::vector<double> row(static_cast<std::size_t>(n));
        double mx = -1e300;
        for (std::int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::int64_t c = 0; c < d; ++c)
                s += static_cast<double>(q[(i)*d + c]) * static_cast<double>(k[(j)*d + c]);
            row[static_cast<std::size_t>(j)] = s * inv;
            mx = std::max(mx, row[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (auto& r : row) {
            r = std::exp(r - mx);
            z += r;
        }
        for (std::int64_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < n; ++j)
                acc += row[static_cast<std::size_t>(j)] / z *
                       static_cast<double>(v[j * d + c]);
            out[i * d + c] = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_bias_lastdim(matmul(x, w), b);
}

}  // namespace

TEST_CASE("drelu hand-evaluated example") {
    Tensor scores({1, 3}, {1, -2, 3});
    Tensor w = drelu(scores, 3, 0.5f, 1e-6f);
    CHECK(w[0] == doctest::Approx(0.66667f).epsilon(1e-3));
    CHECK(w[1] == 0.0f);
    CHECK(w[2] == doctest::Approx(2.0f).epsilon(1e-3));
}

TEST_CASE("drelu all-negative row stays all-zero") {
    Tensor scores({1, 4}, {-1, -2, -0.5f, -3});
    Tensor w = drelu(scores, 4, 0.5f, 1e-6f);
    for (int i = 0; i < 4; ++i) CHECK(w[i] == 0.0f);
}

TEST_CASE("drelu with dp=1, eps=0 is mean-style scaling") {
    Tensor scores({1, 4}, {2, 4, -1, 8});
    Tensor w = drelu(scores, 4, 1.0f, 0.0f);
    CHECK(w[0] == doctest::Approx(0.5f));
    CHECK(w[1] == doctest::Approx(1.0f));
    CHECK(w[2] == 0.0f);
    CHECK(w[3] == doctest::Approx(2.0f));
}

TEST_CASE("drelu rejects zero key length") {
    Tensor scores({1, 3}, {1, 2, 3});
    CHECK_THROWS_AS(drelu(scores, 0, 0.5f, 1e-6f), ShapeError);
}

TEST_CASE("drelu argmax invariance and sparsity") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor scores = random_uniform({1, 16}, rng, -2.0f, 2.0f);
        Tensor r = relu(scores);
        Tensor d = drelu(scores, 16, 0.5f, 1e-6f);

        float rmax = r[0], dmax = d[0];
        int ri = 0, di = 0;
        std::int64_t zeros_d = 0, nonpos = 0;
        for (int i = 0; i < 16; ++i) {
            if (r[i] > rmax) {
                rmax = r[i];
                ri = i;
            }
            if (d[i] > dmax) {
                dmax = d[i];
                di = i;
            }
            if (d[i] == 0.0f) ++zeros_d;
            if (scores[i] <= 0.0f) ++nonpos;
        }
        if (rmax > 0.0f) CHECK(ri == di);
        CHECK(zeros_d == nonpos);
    }
}

TEST_CASE("mhsa single token returns its value projection") {
    Rng rng(3);
    const std::int64_t dm = 8;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    Tensor x = random_uniform({1, 1, dm}, rng);
    Tensor out = mhsa_baseline(x, 2, w);
    Tensor v = linear(x, w.wv, w.bv);
    for (std::int64_t i = 0; i < dm; ++i) CHECK(out[i] == doctest::Approx(v[i]).epsilon(1e-5));
}

TEST_CASE("mhsa of identical tokens yields identical outputs") {
    Rng rng(4);
    const std::int64_t dm = 8, N = 5;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    Tensor one = random_uniform({1, 1, dm}, rng);
    Tensor x({1, N, dm});
    for (std::int64_t i = 0; i < N; ++i)
        for (std::int64_t c = 0; c < dm; ++c) x[i * dm + c] = one[c];
    Tensor out = mhsa_baseline(x, 2, w);
    for (std::int64_t i = 1; i < N; ++i)
        for (std::int64_t c = 0; c < dm; ++c)
            CHECK(out[i * dm + c] == doctest::Approx(out[c]).epsilon(1e-5));
}

TEST_CASE("mhsa matches double-precision reference, heads=1") {
    Rng rng(5);
    const std::int64_t dm = 8, N = 5;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    Tensor x = random_uniform({1, N, dm}, rng);
    Tensor got = mhsa_baseline(x, 1, w);
    Tensor want = softmax_attention_oracle(linear(x, w.wq, w.bq), linear(x, w.wk, w.bk),
                                           linear(x, w.wv, w.bv));
    for (std::int64_t i = 0; i < got.numel(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-4));
}

TEST_CASE("mhsa rejects indivisible head counts") {
    Tensor x({1, 2, 6});
    Rng rng(6);
    MhsaWeights w = make_mhsa_weights(6, rng);
    CHECK_THROWS_AS(mhsa_baseline(x, 4, w), ShapeError);
}

TEST_CASE("fwa attention: single key token closed form") {
    Rng rng(7);
    // feat 4x4, P_l = 2, fold = 1 -> F = 2, one key token = mean of all tokens
    PatchGeometry g{4, 4, 2, 2, 1};
    REQUIRE(g.key_count() == 1);
    FwaConfig cfg;
    cfg.heads = 1;
    cfg.head_dim = 4;
    cfg.geometry = g;
    FwaLayerWeights w = make_fwa_layer_weights(4, rng);
    TokenBatch batch{random_uniform({1, 16, 4}, rng), g};

    FwaOutput out = fwa_attention(batch, cfg, w);

    // hand path: mean token -> kv projection -> per-token drelu * v
    Tensor mean({1, 1, 4});
    for (std::int64_t c = 0; c < 4; ++c) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < 16; ++i) acc += batch.tokens[i * 4 + c];
        mean[c] = static_cast<float>(acc / 16.0);
    }
    Tensor kv = linear(mean, w.wkv, w.bkv);
    Tensor q = linear(batch.tokens, w.wq, w.bq);
    for (std::int64_t i = 0; i < 16; ++i) {
        double s = 0.0;
        for (std::int64_t c = 0; c < 4; ++c)
            s += static_cast<double>(q[i * 4 + c]) * static_cast<double>(kv[c]);
        s /= 2.0;  // sqrt(head_dim) = 2
        const double weight = s > 0 ? s / ((0.5 + 1e-6) * 1.0) : 0.0;
        for (std::int64_t c = 0; c < 4; ++c)
            CHECK(out.output[i * 4 + c] ==
                  doctest::Approx(weight * static_cast<double>(kv[4 + c])).epsilon(1e-4));
    }
}

TEST_CASE("fwa attention: zero tokens give zero output") {
    Rng rng(8);
    PatchGeometry g{4, 4, 1, 1, 1};
    FwaConfig cfg;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.geometry = g;
    FwaLayerWeights w = make_fwa_layer_weights(8, rng);
    TokenBatch batch{Tensor({1, 16, 8}), g};
    FwaOutput out = fwa_attention(batch, cfg, w);
    for (std::int64_t i = 0; i < out.output.numel(); ++i) CHECK(out.output[i] == 0.0f);
}

TEST_CASE("cache path equals recomputation and skips aggregation") {
    Rng rng(9);
    PatchGeometry g{8, 8, 1, 1, 2};
    FwaConfig cfg;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.geometry = g;
    const std::int64_t dm = 8;
    std::vector<FwaLayerWeights> w;
    w.push_back(make_fwa_layer_weights(dm, rng));
    w.push_back(make_fwa_layer_weights(dm, rng));
    TokenBatch first{random_uniform({2, 64, dm}, rng), g};

    // cached: FAWA once, both layers project the cached key sequence
    counters::reset_op_counters();
    FwaOutput l1 = fwa_attention(first, cfg, w[0]);
    FwaOutput l2 = fwa_attention(first, cfg, w[1], &l1.cache);
    const std::uint64_t cached_invocations = counters::fawa_invocations.load();

    // uncached: each layer re-aggregates the same first-layer tokens
    counters::reset_op_counters();
    FwaOutput u1 = fwa_attention(first, cfg, w[0]);
    FwaOutput u2 = fwa_attention(first, cfg, w[1]);
    const std::uint64_t uncached_invocations = counters::fawa_invocations.load();

    CHECK(cached_invocations == 1u);
    CHECK(uncached_invocations == 2u);
    for (std::int64_t i = 0; i < l1.output.numel(); ++i)
        CHECK(l1.output[i] == doctest::Approx(u1.output[i]).epsilon(1e-6));
    for (std::int64_t i = 0; i < l2.output.numel(); ++i)
        CHECK(l2.output[i] == doctest::Approx(u2.output[i]).epsilon(1e-6));
}

TEST_CASE("cache fingerprint mismatch is an error") {
    Rng rng(10);
    PatchGeometry g{8, 8, 1, 1, 2};
    FwaConfig cfg;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.geometry = g;
    FwaLayerWeights w = make_fwa_layer_weights(8, rng);
    TokenBatch batch{random_uniform({1, 64, 8}, rng), g};
    KeyCache stale{Tensor({1, 4, 8}), "4x4/p1x1/f1/b1/c8"};
    CHECK_THROWS_AS(fwa_attention(batch, cfg, w, &stale), ShapeError);
}

TEST_CASE("pooled-key attention with full-resolution pooling equals mhsa") {
    Rng rng(11);
    PatchGeometry g{4, 4, 1, 1, 1};
    const std::int64_t dm = 8;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    TokenBatch batch{random_uniform({1, 16, dm}, rng), g};
    Tensor pooled = pooled_key_attention_baseline(batch, 16, 2, w);
    Tensor plain = mhsa_baseline(batch.tokens, 2, w);
    for (std::int64_t i = 0; i < pooled.numel(); ++i)
        CHECK(pooled[i] == doctest::Approx(plain[i]).epsilon(1e-5));
}

TEST_CASE("pooled-key attention on all-ones input gives equal outputs") {
    Rng rng(12);
    PatchGeometry g{4, 4, 1, 1, 1};
    const std::int64_t dm = 8;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    TokenBatch batch{full({1, 16, dm}, 1.0f), g};
    Tensor out = pooled_key_attention_baseline(batch, 4, 2, w);
    for (std::int64_t i = 1; i < 16; ++i)
        for (std::int64_t c = 0; c < dm; ++c)
            CHECK(out[i * dm + c] == doctest::Approx(out[c]).epsilon(1e-5));
}

TEST_CASE("pooled-key attention matches explicit pooled reference") {
    Rng rng(13);
    PatchGeometry g{4, 4, 1, 1, 1};
    const std::int64_t dm = 6;
    MhsaWeights w = make_mhsa_weights(dm, rng);
    TokenBatch batch{random_uniform({1, 16, dm}, rng), g};
    Tensor got = pooled_key_attention_baseline(batch, 4, 1, w);
    Tensor pooled = pool_aggregate_baseline(batch, 4);
    Tensor want = softmax_attention_oracle(linear(batch.tokens, w.wq, w.bq),
                                           linear(pooled, w.wk, w.bk),
                                           linear(pooled, w.wv, w.bv));
    for (std::int64_t i = 0; i < got.numel(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-4));
}

TEST_CASE("identical seeds produce bit-identical outputs") {
    for (int run = 0; run < 2; ++run) {
        Rng rng(99);
        PatchGeometry g{8, 8, 1, 1, 1};
        FwaConfig cfg;
        cfg.heads = 4;
        cfg.head_dim = 4;
        cfg.geometry = g;
        FwaLayerWeights w = make_fwa_layer_weights(16, rng);
        TokenBatch batch{random_uniform({1, 64, 16}, rng), g};
        FwaOutput out = fwa_attention(batch, cfg, w);
        static std::vector<float> first_run;
        if (run == 0) {
            first_run.assign(out.output.data(), out.output.data() + out.output.numel());
        } else {
            for (std::int64_t i = 0; i < out.output.numel(); ++i)
                CHECK(out.output[i] == first_run[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("attention core MAC counter is quadratic for MHSA, linear for FWA") {
    Rng rng(14);
    const std::int64_t dm = 16;
    std::uint64_t mhsa_macs[2], fwa_macs[2];
    int idx = 0;
    for (std::int64_t N : {64, 256}) {
        Tensor q = random_uniform({1, N, dm}, rng);
        counters::reset_op_counters();
        attention_core(q, q, q, 4, Weighting::SoftMax);
        mhsa_macs[idx] = counters::attention_core_macs.load();

        Tensor keys = random_uniform({1, 8, dm}, rng);  // fixed key count
        counters::reset_op_counters();
        attention_core(q, keys, keys, 4, Weighting::DReLu);
        fwa_macs[idx] = counters::attention_core_macs.load();
        ++idx;
    }
    CHECK(mhsa_macs[1] == 16u * mhsa_macs[0]);  // (256/64)^2
    CHECK(fwa_macs[1] == 4u * fwa_macs[0]);     // 256/64
}

#pragma once

// LOLViT backbone assembly: conv stem, GhostNet bottlenecks, hybrid
// LOLViT blocks (serialize -> L x FWA transformer layers with a shared key
// cache -> deserialize -> feature fusion). Forward inference only; weights
// are seeded at build time and immutable afterwards.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwa/attention.hpp"
#include "fwa/fawa.hpp"
#include "fwa/geometry.hpp"
#include "fwa/rng.hpp"
#include "fwa/tensor.hpp"

namespace fwa {

// ---- small layers ---------------------------------------------------------

// Per-channel affine, the inference-time residue of batch norm.
struct ScaleShift {
    Tensor gamma, beta;  // [C]

    static ScaleShift make(std::int64_t c) {
        ScaleShift s{full({c}, 1.0f), Tensor({c})};
        return s;
    }

    Tensor forward(const Tensor& x) const {
        const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
        Tensor out = x;
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                float* p = out.data() + (b * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) p[i] = p[i] * gamma[c] + beta[c];
            }
        return out;
    }

    std::int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

struct ConvLayer {
    Tensor w;     // [O, C/g, k, k]
    Tensor bias;  // [O] or empty
    int stride = 1;
    int groups = 1;
    int pad = 0;

    static ConvLayer make(std::int64_t in_ch, std::int64_t out_ch, int k, int stride, int groups,
                          bool with_bias, Rng& rng) {
        ConvLayer l;
        l.w = Tensor({out_ch, in_ch / groups, k, k});
        fill_he_normal(l.w, rng, (in_ch / groups) * k * k);
        if (with_bias) l.bias = Tensor({out_ch});
        l.stride = stride;
        l.groups = groups;
        l.pad = k / 2;
        return l;
    }

    Tensor forward(const Tensor& x) const { return conv2d(x, w, bias, stride, groups, pad); }

    std::int64_t param_count() const { return w.numel() + bias.numel(); }
};

inline Tensor relu_map(const Tensor& x) { return relu(x); }

// ---- GhostNet pieces ------------------------------------------------------

// Ghost module: pointwise conv produces half the channels, a cheap 3x3
// depthwise conv generates the rest, outputs concatenated.
struct GhostModule {
    ConvLayer primary;  // 1x1, cin -> ci
    ScaleShift bn1;
    ConvLayer cheap;  // 3x3 depthwise, ci -> ci
    ScaleShift bn2;
    std::int64_t out_ch = 0;
    bool act = true;

    static GhostModule make(std::int64_t cin, std::int64_t cout, bool act, Rng& rng) {
        const std::int64_t ci = (cout + 1) / 2;
        GhostModule m;
        m.primary = ConvLayer::make(cin, ci, 1, 1, 1, false, rng);
        m.bn1 = ScaleShift::make(ci);
        m.cheap = ConvLayer::make(ci, ci, 3, 1, static_cast<int>(ci), false, rng);
        m.bn2 = ScaleShift::make(ci);
        m.out_ch = cout;
        m.act = act;
        return m;
    }

    Tensor forward(const Tensor& x) const {
        Tensor a = bn1.forward(primary.forward(x));
        if (act) a = relu_map(a);
        Tensor b = bn2.forward(cheap.forward(a));
        if (act) b = relu_map(b);
        Tensor both = stack({a, b}, 1);
        if (both.dim(1) == out_ch) return both;
        return chunk(both, 1, static_cast<int>(both.dim(1)))[0];  // unreachable for even cout
    }

    std::int64_t param_count() const {
        return primary.param_count() + bn1.param_count() + cheap.param_count() +
               bn2.param_count();
    }
};

struct GhostBottleneckSpec {
    std::int64_t in_ch = 0;
    std::int64_t out_ch = 0;
    int kernel = 1;  // 1 => stride 1, 3 => stride 2
    int stride = 1;
    std::int64_t hidden = 0;  // expansion width
};

struct GhostBottleneck {
    GhostBottleneckSpec spec;
    GhostModule expand;
    ConvLayer down;  // depthwise stride-2, present when stride == 2
    ScaleShift down_bn;
    GhostModule project;

    static GhostBottleneck make(const GhostBottleneckSpec& spec, Rng& rng) {
        GhostBottleneck b;
        b.spec = spec;
        b.expand = GhostModule::make(spec.in_ch, spec.hidden, true, rng);
        if (spec.stride == 2) {
            b.down = ConvLayer::make(spec.hidden, spec.hidden, 3, 2,
                                     static_cast<int>(spec.hidden), false, rng);
            b.down_bn = ScaleShift::make(spec.hidden);
        }
        b.project = GhostModule::make(spec.hidden, spec.out_ch, false, rng);
        return b;
    }

    Tensor forward(const Tensor& x) const {
        if (x.dim(1) != spec.in_ch)
            throw ShapeError("ghost bottleneck: expected " + std::to_string(spec.in_ch) +
                             " channels, got " + std::to_string(x.dim(1)));
        Tensor h = expand.forward(x);
        if (spec.stride == 2) h = down_bn.forward(down.forward(h));
        Tensor out = project.forward(h);
        if (spec.stride == 1 && spec.in_ch == spec.out_ch) out = add(out, x);
        return out;
    }

    std::int64_t param_count() const {
        std::int64_t p = expand.param_count() + project.param_count();
        if (spec.stride == 2) p += down.param_count() + down_bn.param_count();
        return p;
    }
};

// ---- feature fusion -------------------------------------------------------

// Parallel local branch added back onto the attention output: depthwise
// 5x5 -> pointwise (channel halving) -> depthwise 7x7 -> pointwise, each
// followed by ReLU.
struct FeatureFusion {
    ConvLayer dw5, pw1, dw7, pw2;

    static FeatureFusion make(std::int64_t c, Rng& rng) {
        FeatureFusion f;
        const std::int64_t ch = c / 2;
        f.dw5 = ConvLayer::make(c, c, 5, 1, static_cast<int>(c), true, rng);
        f.pw1 = ConvLayer::make(c, ch, 1, 1, 1, true, rng);
        f.dw7 = ConvLayer::make(ch, ch, 7, 1, static_cast<int>(ch), true, rng);
        f.pw2 = ConvLayer::make(ch, c, 1, 1, 1, true, rng);
        return f;
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = relu_map(dw5.forward(x));
        h = relu_map(pw1.forward(h));
        h = relu_map(dw7.forward(h));
        h = relu_map(pw2.forward(h));
        return add(x, h);
    }

    std::int64_t param_count() const {
        return dw5.param_count() + pw1.param_count() + dw7.param_count() + pw2.param_count();
    }
};

// ---- LOLViT block ---------------------------------------------------------

struct LolvitBlockSpec {
    std::int64_t channels = 0;  // block in/out channels
    std::int64_t dim = 0;       // transformer model dim
    int layers_l = 1;
    std::int64_t fold = 1;
    std::int64_t patch_l = 1;
    std::int64_t patch_w = 1;
    int heads = 4;
};

struct TransformerLayer {
    Tensor ln1_g, ln1_b;
    FwaLayerWeights attn;
    Tensor ln2_g, ln2_b;
    Tensor ffn_w1, ffn_b1;  // [d, 2d]
    Tensor ffn_w2, ffn_b2;  // [2d, d]

    static TransformerLayer make(std::int64_t d, Rng& rng) {
        TransformerLayer t;
        t.ln1_g = full({d}, 1.0f);
        t.ln1_b = Tensor({d});
        t.attn = make_fwa_layer_weights(d, rng);
        t.ln2_g = full({d}, 1.0f);
        t.ln2_b = Tensor({d});
        t.ffn_w1 = Tensor({d, 2 * d});
        fill_he_normal(t.ffn_w1, rng, d);
        t.ffn_b1 = Tensor({2 * d});
        t.ffn_w2 = Tensor({2 * d, d});
        fill_he_normal(t.ffn_w2, rng, 2 * d);
        t.ffn_b2 = Tensor({d});
        return t;
    }

    std::int64_t param_count() const {
        return ln1_g.numel() + ln1_b.numel() + attn.wq.numel() + attn.bq.numel() +
               attn.wkv.numel() + attn.bkv.numel() + ln2_g.numel() + ln2_b.numel() +
               ffn_w1.numel() + ffn_b1.numel() + ffn_w2.numel() + ffn_b2.numel();
    }
};

// Largest divisor of n that does not exceed the requested fold; keeps the
// key-sequence geometry valid at input sizes whose maps the configured
// fold does not divide.
inline std::int64_t effective_fold(std::int64_t base_keys, std::int64_t fold) {
    for (std::int64_t f = std::min(fold, base_keys); f >= 1; --f)
        if (base_keys % f == 0) return f;
    return 1;
}

struct LolvitBlock {
    LolvitBlockSpec spec;
    ConvLayer local_dw;  // 3x3 depthwise on block channels
    ScaleShift local_bn;
    ConvLayer raise_pw;  // channels -> dim
    ScaleShift raise_bn;
    std::vector<TransformerLayer> layers;
    ConvLayer lower_pw;  // dim -> channels
    ScaleShift lower_bn;
    FeatureFusion fusion;

    static LolvitBlock make(const LolvitBlockSpec& spec, Rng& rng) {
        LolvitBlock b;
        b.spec = spec;
        const std::int64_t c = spec.channels, d = spec.dim;
        b.local_dw = ConvLayer::make(c, c, 3, 1, static_cast<int>(c), false, rng);
        b.local_bn = ScaleShift::make(c);
        b.raise_pw = ConvLayer::make(c, d, 1, 1, 1, false, rng);
        b.raise_bn = ScaleShift::make(d);
        for (int l = 0; l < spec.layers_l; ++l) b.layers.push_back(TransformerLayer::make(d, rng));
        b.lower_pw = ConvLayer::make(d, c, 1, 1, 1, false, rng);
        b.lower_bn = ScaleShift::make(c);
        b.fusion = FeatureFusion::make(c, rng);
        return b;
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = relu_map(local_bn.forward(local_dw.forward(x)));
        h = relu_map(raise_bn.forward(raise_pw.forward(h)));

        PatchGeometry geom{h.dim(2), h.dim(3), spec.patch_l, spec.patch_w, 1};
        geom.fold = effective_fold(geom.base_keys(), spec.fold);
        TokenBatch batch = serialize(h, geom);

        FwaConfig cfg;
        cfg.heads = spec.heads;
        cfg.head_dim = static_cast<int>(spec.dim / spec.heads);
        cfg.geometry = batch.geometry;

        Tensor tokens = std::move(batch.tokens);
        KeyCache cache;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const TransformerLayer& tl = layers[l];
            Tensor pre = layer_norm_lastdim(tokens, tl.ln1_g, tl.ln1_b);
            FwaOutput r = fwa_attention(TokenBatch{std::move(pre), batch.geometry}, cfg, tl.attn,
                                        l == 0 ? nullptr : &cache);
            cache = std::move(r.cache);
            tokens = add(tokens, r.output);

            Tensor pre2 = layer_norm_lastdim(tokens, tl.ln2_g, tl.ln2_b);
            Tensor f1 = relu(add_bias_lastdim(matmul(pre2, tl.ffn_w1), tl.ffn_b1));
            Tensor f2 = add_bias_lastdim(matmul(f1, tl.ffn_w2), tl.ffn_b2);
            tokens = add(tokens, f2);
        }

        Tensor out = deserialize(TokenBatch{std::move(tokens), batch.geometry});
        out = relu_map(lower_bn.forward(lower_pw.forward(out)));
        return fusion.forward(out);
    }

    std::int64_t param_count() const {
        std::int64_t p = local_dw.param_count() + local_bn.param_count() +
                         raise_pw.param_count() + raise_bn.param_count() +
                         lower_pw.param_count() + lower_bn.param_count() +
                         fusion.param_count();
        for (const auto& l : layers) p += l.param_count();
        return p;
    }
};

// ---- model ----------------------------------------------------------------

enum class Variant { S, X };

inline const char* variant_name(Variant v) { return v == Variant::S ? "S" : "X"; }

struct Stem {
    // X: dense 3x3 stride-2 conv. S: half-width primary conv plus a cheap
    // depthwise conv supplying the other half of the channels.
    bool ghost_style = false;
    ConvLayer conv;
    ScaleShift bn;
    ConvLayer cheap;
    ScaleShift cheap_bn;

    static Stem make(Variant v, Rng& rng) {
        Stem s;
        if (v == Variant::X) {
            s.conv = ConvLayer::make(3, 32, 3, 2, 1, false, rng);
            s.bn = ScaleShift::make(32);
        } else {
            s.ghost_style = true;
            s.conv = ConvLayer::make(3, 16, 3, 2, 1, false, rng);
            s.bn = ScaleShift::make(16);
            s.cheap = ConvLayer::make(16, 16, 3, 1, 16, false, rng);
            s.cheap_bn = ScaleShift::make(16);
        }
        return s;
    }

    Tensor forward(const Tensor& x) const {
        Tensor a = relu_map(bn.forward(conv.forward(x)));
        if (!ghost_style) return a;
        Tensor b = relu_map(cheap_bn.forward(cheap.forward(a)));
        return stack({a, b}, 1);
    }

    std::int64_t param_count() const {
        std::int64_t p = conv.param_count() + bn.param_count();
        if (ghost_style) p += cheap.param_count() + cheap_bn.param_count();
        return p;
    }
};

struct StageSpec {
    enum Kind { Stem, Ghost, Vit } kind = Ghost;
    GhostBottleneckSpec ghost;
    LolvitBlockSpec vit;
    std::int64_t ref_params = 0;  // published reference parameter budget
    std::string name;
};

struct ModelSpec {
    Variant variant = Variant::S;
    std::vector<StageSpec> stages;
    std::int64_t ref_total_params = 0;
};

inline ModelSpec model_spec(Variant v) {
    const bool x = (v == Variant::X);
    // Per-stage expansion widths and transformer dims are sized to the
    // published per-stage parameter budgets.
    const std::int64_t gh[6] = {x ? 84 : 58,  x ? 120 : 98, x ? 152 : 90,
                                x ? 304 : 170, x ? 460 : 228, x ? 612 : 334};
    const std::int64_t vd[3] = {x ? 176 : 132, x ? 232 : 180, x ? 324 : 220};
    const std::int64_t ref_ghost[6] = {x ? 3440 : 2448,  x ? 8160 : 6872,
                                       x ? 10976 : 6696, x ? 30288 : 17208,
                                       x ? 60528 : 30288, x ? 109728 : 60528};
    const std::int64_t ref_vit[3] = {x ? 269943 : 163927, x ? 468439 : 295703,
                                     x ? 900279 : 472535};

    ModelSpec m;
    m.variant = v;
    m.ref_total_params = x ? 1862709 : 1056669;

    StageSpec stem;
    stem.kind = StageSpec::Stem;
    stem.ref_params = x ? 928 : 464;
    stem.name = "Conv 3->32 3x3/2";
    m.stages.push_back(stem);

    auto ghost = [&](std::int64_t cin, std::int64_t cout, int kernel, std::int64_t hidden,
                     std::int64_t ref) {
        StageSpec s;
        s.kind = StageSpec::Ghost;
        s.ghost = GhostBottleneckSpec{cin, cout, kernel, kernel == 3 ? 2 : 1, hidden};
        s.ref_params = ref;
        s.name = "GhostNetBlock " + std::to_string(cin) + "->" + std::to_string(cout) + " " +
                 std::to_string(kernel) + "x" + std::to_string(kernel);
        m.stages.push_back(s);
    };
    auto vit = [&](std::int64_t c, std::int64_t d, std::int64_t fold, std::int64_t ref) {
        StageSpec s;
        s.kind = StageSpec::Vit;
        s.vit = LolvitBlockSpec{c, d, 1, fold, 1, 1, 4};
        s.ref_params = ref;
        s.name = "LOLViTBlock " + std::to_string(c);
        m.stages.push_back(s);
    };

    ghost(32, 32, 1, gh[0], ref_ghost[0]);
    ghost(32, 64, 3, gh[1], ref_ghost[1]);
    ghost(64, 64, 1, gh[2], ref_ghost[2]);
    ghost(64, 96, 3, gh[3], ref_ghost[3]);
    vit(96, vd[0], 1, ref_vit[0]);
    ghost(96, 128, 3, gh[4], ref_ghost[4]);
    vit(128, vd[1], 2, ref_vit[1]);
    ghost(128, 192, 3, gh[5], ref_ghost[5]);
    vit(192, vd[2], 4, ref_vit[2]);
    return m;
}

struct Model {
    ModelSpec spec;
    Stem stem;
    std::vector<GhostBottleneck> ghosts;  // in stage order
    std::vector<LolvitBlock> vits;        // in stage order

    std::int64_t stage_param_count(std::size_t stage) const {
        std::size_t gi = 0, vi = 0;
        for (std::size_t i = 0; i < spec.stages.size(); ++i) {
            const StageSpec& s = spec.stages[i];
            std::int64_t p = 0;
            if (s.kind == StageSpec::Stem) p = stem.param_count();
            else if (s.kind == StageSpec::Ghost) p = ghosts[gi++].param_count();
            else p = vits[vi++].param_count();
            if (i == stage) return p;
        }
        throw ShapeError("stage_param_count: bad stage index");
    }
};

inline Model build_model(Variant v, std::uint32_t seed) {
    Rng rng(seed);
    Model m;
    m.spec = model_spec(v);
    m.stem = Stem::make(v, rng);
    for (const StageSpec& s : m.spec.stages) {
        if (s.kind == StageSpec::Ghost) m.ghosts.push_back(GhostBottleneck::make(s.ghost, rng));
        else if (s.kind == StageSpec::Vit) m.vits.push_back(LolvitBlock::make(s.vit, rng));
    }
    return m;
}

inline std::int64_t count_params(const Model& m) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < m.spec.stages.size(); ++i) total += m.stage_param_count(i);
    return total;
}

inline Tensor model_forward(const Model& m, const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != 3)
        throw ShapeError("model_forward expects [B,3,H,W], got " + shape_str(x.shape()));
    if (x.dim(2) % 32 != 0 || x.dim(3) % 32 != 0)
        throw ShapeError("model_forward: input H and W must be divisible by 32");

    Tensor h = m.stem.forward(x);
    std::size_t gi = 0, vi = 0;
    for (const StageSpec& s : m.spec.stages) {
        if (s.kind == StageSpec::Ghost) h = m.ghosts[gi++].forward(h);
        else if (s.kind == StageSpec::Vit) h = m.vits[vi++].forward(h);
    }
    return h;
}

inline nlohmann::json model_summary(const Model& m) {
    nlohmann::json stages = nlohmann::json::array();
    std::int64_t total = 0;
    for (std::size_t i = 0; i < m.spec.stages.size(); ++i) {
        const StageSpec& s = m.spec.stages[i];
        const std::int64_t p = m.stage_param_count(i);
        total += p;
        nlohmann::json row;
        row["stage"] = s.name;
        row["params"] = p;
        row["ref_params"] = s.ref_params;
        row["ref_delta_pct"] =
            100.0 * (static_cast<double>(p) - static_cast<double>(s.ref_params)) /
            static_cast<double>(s.ref_params);
        if (s.kind == StageSpec::Ghost) {
            row["in_ch"] = s.ghost.in_ch;
            row["out_ch"] = s.ghost.out_ch;
            row["kernel"] = s.ghost.kernel;
            row["stride"] = s.ghost.stride;
        } else if (s.kind == StageSpec::Vit) {
            row["channels"] = s.vit.channels;
            row["dim"] = s.vit.dim;
            row["layers"] = s.vit.layers_l;
            row["fold"] = s.vit.fold;
            row["heads"] = s.vit.heads;
        }
        stages.push_back(row);
    }
    nlohmann::json out;
    out["variant"] = variant_name(m.spec.variant);
    out["stages"] = stages;
    out["total_params"] = total;
    out["ref_total_params"] = m.spec.ref_total_params;
    out["ref_delta_pct"] =
        100.0 * (static_cast<double>(total) - static_cast<double>(m.spec.ref_total_params)) /
        static_cast<double>(m.spec.ref_total_params);
    return out;
}

}  // namespace fwa

#pragma once

// Minimal dense float32 tensor with exactly the ops the rest of the
// library needs. Row-major, contiguous, no views; transpose and friends
// materialize. All ops are pure functions over immutable inputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fwa {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Global instrumentation. Cheap atomics, always on: the benchmark and the
// cache/complexity tests read these.
namespace counters {

inline std::atomic<std::uint64_t> fawa_invocations{0};
inline std::atomic<std::uint64_t> fawa_elements_read{0};
// Multiply-accumulates inside attention cores (QK^T and weight*V only,
// projections excluded so the analytic growth exponents stay exact).
inline std::atomic<std::uint64_t> attention_core_macs{0};
inline std::atomic<std::int64_t> live_tensor_bytes{0};
inline std::atomic<std::int64_t> peak_tensor_bytes{0};

inline void note_alloc(std::int64_t bytes) {
    const std::int64_t live = live_tensor_bytes.fetch_add(bytes) + bytes;
    std::int64_t peak = peak_tensor_bytes.load();
    while (live > peak && !peak_tensor_bytes.compare_exchange_weak(peak, live)) {
    }
}

inline void note_free(std::int64_t bytes) { live_tensor_bytes.fetch_sub(bytes); }

inline void reset_peak() { peak_tensor_bytes.store(live_tensor_bytes.load()); }

inline void reset_op_counters() {
    fawa_invocations = 0;
    fawa_elements_read = 0;
    attention_core_macs = 0;
}

}  // namespace counters

inline std::string shape_str(const std::vector<std::int64_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        for (auto d : shape_)
            if (d <= 0) throw ShapeError("non-positive axis in shape " + shape_str(shape_));
        data_.assign(static_cast<std::size_t>(numel_of(shape_)), 0.0f);
        tracked_ = static_cast<std::int64_t>(data_.size() * sizeof(float));
        counters::note_alloc(tracked_);
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != static_cast<std::int64_t>(data_.size()))
            throw ShapeError("data length does not match shape " + shape_str(shape_));
        tracked_ = static_cast<std::int64_t>(data_.size() * sizeof(float));
        counters::note_alloc(tracked_);
    }

    Tensor(const Tensor& o) : shape_(o.shape_), data_(o.data_), tracked_(o.tracked_) {
        counters::note_alloc(tracked_);
    }
    Tensor(Tensor&& o) noexcept
        : shape_(std::move(o.shape_)), data_(std::move(o.data_)), tracked_(o.tracked_) {
        o.tracked_ = 0;
        o.shape_.clear();
    }
    Tensor& operator=(Tensor o) noexcept {
        std::swap(shape_, o.shape_);
        std::swap(data_, o.data_);
        std::swap(tracked_, o.tracked_);
        return *this;
    }
    ~Tensor() { counters::note_free(tracked_); }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(int i) const {
        const int r = rank();
        if (i < 0) i += r;
        return shape_[static_cast<std::size_t>(i)];
    }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

private:
    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
    std::int64_t tracked_ = 0;
};

inline Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

inline Tensor full(std::vector<std::int64_t> shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data(), t.data() + t.numel(), value);
    return t;
}

// ---- matmul ---------------------------------------------------------------

// Batched matmul over the last two axes; leading axes must agree or
// broadcast from 1 (a missing leading axis counts as 1).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw ShapeError("matmul needs rank >= 2, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::int64_t m = a.dim(-2), k = a.dim(-1);
    const std::int64_t k2 = b.dim(-2), p = b.dim(-1);
    if (k != k2)
        throw ShapeError("matmul inner mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));

    const int abat = a.rank() - 2, bbat = b.rank() - 2;
    const int nbat = std::max(abat, bbat);
    std::vector<std::int64_t> batch(nbat, 1);
    for (int i = 0; i < nbat; ++i) {
        const std::int64_t da = (i < nbat - abat) ? 1 : a.dim(i - (nbat - abat));
        const std::int64_t db = (i < nbat - bbat) ? 1 : b.dim(i - (nbat - bbat));
        if (da != db && da != 1 && db != 1)
            throw ShapeError("matmul batch mismatch: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
        batch[i] = std::max(da, db);
    }

    std::vector<std::int64_t> out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(p);
    Tensor out(out_shape);

    // Per-batch element strides (0 where broadcast).
    std::vector<std::int64_t> astride(nbat, 0), bstride(nbat, 0);
    std::int64_t acc = m * k;
    for (int i = abat - 1; i >= 0; --i) {
        const int gi = i + (nbat - abat);
        astride[gi] = (a.dim(i) == 1) ? 0 : acc;
        acc *= a.dim(i);
    }
    acc = k * p;
    for (int i = bbat - 1; i >= 0; --i) {
        const int gi = i + (nbat - bbat);
        bstride[gi] = (b.dim(i) == 1) ? 0 : acc;
        acc *= b.dim(i);
    }

    const std::int64_t nbatches = Tensor::numel_of(batch);
    for (std::int64_t bi = 0; bi < nbatches; ++bi) {
        std::int64_t rem = bi, aoff = 0, boff = 0;
        for (int i = nbat - 1; i >= 0; --i) {
            const std::int64_t idx = rem % batch[i];
            rem /= batch[i];
            aoff += idx * astride[i];
            boff += idx * bstride[i];
        }
        const float* pa = a.data() + aoff;
        const float* pb = b.data() + boff;
        float* po = out.data() + bi * m * p;
        for (std::int64_t i = 0; i < m; ++i) {
            float* orow = po + i * p;
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const float av = pa[i * k + kk];
                const float* brow = pb + kk * p;
                for (std::int64_t j = 0; j < p; ++j) orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

// ---- conv2d ---------------------------------------------------------------

// Direct convolution (cross-correlation). w: [O, C/groups, k, k];
// padding must be 0 or k/2 ("same"); bias optional (empty tensor = none).
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                     int groups, int pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw ShapeError("conv2d expects 4D input/weight, got " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()));
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t O = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (kh != kw || kh % 2 == 0) throw ShapeError("conv2d kernel must be odd square");
    if (groups <= 0 || C % groups != 0 || O % groups != 0)
        throw ShapeError("conv2d: channels not divisible by groups");
    if (Cg != C / groups)
        throw ShapeError("conv2d: weight in-channels " + std::to_string(Cg) +
                         " != C/groups = " + std::to_string(C / groups));
    if (pad != 0 && pad != static_cast<int>(kh) / 2)
        throw ShapeError("conv2d: padding must be 0 or k/2");
    if (bias.numel() != 0 && bias.numel() != O) throw ShapeError("conv2d: bad bias length");

    const std::int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d: empty output");
    Tensor out({B, O, Ho, Wo});

    const std::int64_t og = O / groups;
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t o = 0; o < O; ++o) {
            const std::int64_t g = o / og;
            const float bv = bias.numel() ? bias[o] : 0.0f;
            float* outp = out.data() + ((b * O + o) * Ho) * Wo;
            for (std::int64_t oy = 0; oy < Ho; ++oy) {
                for (std::int64_t ox = 0; ox < Wo; ++ox) {
                    float acc = bv;
                    for (std::int64_t ci = 0; ci < Cg; ++ci) {
                        const std::int64_t c = g * Cg + ci;
                        const float* xp = x.data() + ((b * C + c) * H) * W;
                        const float* wp = w.data() + ((o * Cg + ci) * kh) * kw;
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                acc += xp[iy * W + ix] * wp[ky * kw + kx];
                            }
                        }
                    }
                    outp[oy * Wo + ox] = acc;
                }
            }
        }
    }
    return out;
}

// ---- elementwise / normalization ------------------------------------------

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0f ? out[i] : 0.0f;
    return out;
}

inline Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() < 1 || x.dim(-1) < 1) throw ShapeError("softmax: last axis empty");
    const std::int64_t n = x.dim(-1);
    const std::int64_t rows = x.numel() / n;
    Tensor out = x;
    for (std::int64_t r = 0; r < rows; ++r) {
        float* p = out.data() + r * n;
        float mx = p[0];
        for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, p[i]);
        float sum = 0.0f;
        for (std::int64_t i = 0; i < n; ++i) {
            p[i] = std::exp(p[i] - mx);
            sum += p[i];
        }
        for (std::int64_t i = 0; i < n; ++i) p[i] /= sum;
    }
    return out;
}

// Layer norm over the last axis, eps clamps zero variance to zero output.
inline Tensor layer_norm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                 float eps = 1e-5f) {
    const std::int64_t n = x.dim(-1);
    if (gamma.numel() != n || beta.numel() != n) throw ShapeError("layer_norm: bad scale/shift");
    const std::int64_t rows = x.numel() / n;
    Tensor out = x;
    for (std::int64_t r = 0; r < rows; ++r) {
        float* p = out.data() + r * n;
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += p[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = p[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const float inv = 1.0f / std::sqrt(static_cast<float>(var) + eps);
        for (std::int64_t i = 0; i < n; ++i)
            p[i] = (static_cast<float>(p[i] - mean) * inv) * gamma[i] + beta[i];
    }
    return out;
}

// ---- shape ops ------------------------------------------------------------

inline Tensor reshape(const Tensor& x, std::vector<std::int64_t> new_shape) {
    if (Tensor::numel_of(new_shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(new_shape));
    Tensor out = x;
    return Tensor(std::move(new_shape),
                  std::vector<float>(out.data(), out.data() + out.numel()));
}

inline std::vector<Tensor> chunk(const Tensor& x, int axis, int parts) {
    if (axis < 0) axis += x.rank();
    if (axis < 0 || axis >= x.rank()) throw ShapeError("chunk: bad axis");
    const std::int64_t len = x.shape()[static_cast<std::size_t>(axis)];
    if (parts <= 0 || len % parts != 0)
        throw ShapeError("chunk: axis length " + std::to_string(len) + " not divisible by " +
                         std::to_string(parts));
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    const std::int64_t piece = len / parts;

    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(parts));
    for (int p = 0; p < parts; ++p) {
        std::vector<std::int64_t> shp = x.shape();
        shp[static_cast<std::size_t>(axis)] = piece;
        Tensor t(shp);
        for (std::int64_t oi = 0; oi < outer; ++oi) {
            const float* src = x.data() + (oi * len + p * piece) * inner;
            float* dst = t.data() + oi * piece * inner;
            std::copy(src, src + piece * inner, dst);
        }
        out.push_back(std::move(t));
    }
    return out;
}

// Concatenates along an existing axis; inverts chunk on the same axis.
inline Tensor stack(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("stack: no inputs");
    const Tensor& first = parts.front();
    int ax = axis < 0 ? axis + first.rank() : axis;
    if (ax < 0 || ax >= first.rank()) throw ShapeError("stack: bad axis");
    std::int64_t total = 0;
    for (const Tensor& t : parts) {
        if (t.rank() != first.rank()) throw ShapeError("stack: rank mismatch");
        for (int i = 0; i < first.rank(); ++i)
            if (i != ax && t.dim(i) != first.dim(i)) throw ShapeError("stack: shape mismatch");
        total += t.dim(ax);
    }
    std::vector<std::int64_t> shp = first.shape();
    shp[static_cast<std::size_t>(ax)] = total;
    Tensor out(shp);

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= first.dim(i);
    for (int i = ax + 1; i < first.rank(); ++i) inner *= first.dim(i);

    std::int64_t off = 0;
    for (const Tensor& t : parts) {
        const std::int64_t len = t.dim(ax);
        for (std::int64_t oi = 0; oi < outer; ++oi) {
            const float* src = t.data() + oi * len * inner;
            float* dst = out.data() + (oi * total + off) * inner;
            std::copy(src, src + len * inner, dst);
        }
        off += len;
    }
    return out;
}

// Materializing swap of the last two axes.
inline Tensor transpose_last2(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("transpose_last2: rank < 2");
    const std::int64_t m = x.dim(-2), n = x.dim(-1);
    std::vector<std::int64_t> shp = x.shape();
    std::swap(shp[shp.size() - 1], shp[shp.size() - 2]);
    Tensor out(shp);
    const std::int64_t nbat = x.numel() / (m * n);
    for (std::int64_t b = 0; b < nbat; ++b) {
        const float* src = x.data() + b * m * n;
        float* dst = out.data() + b * m * n;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = a;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

inline Tensor scale(const Tensor& a, float s) {
    Tensor out = a;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return out;
}

// Adds a length-D bias over the last axis.
inline Tensor add_bias_lastdim(const Tensor& x, const Tensor& bias) {
    const std::int64_t n = x.dim(-1);
    if (bias.numel() != n) throw ShapeError("add_bias_lastdim: bad bias length");
    Tensor out = x;
    const std::int64_t rows = x.numel() / n;
    for (std::int64_t r = 0; r < rows; ++r) {
        float* p = out.data() + r * n;
        for (std::int64_t i = 0; i < n; ++i) p[i] += bias[i];
    }
    return out;
}

}  // namespace fwa

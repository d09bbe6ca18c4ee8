#pragma once

#include <algorithm>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "deepcmc/tensor.hpp"

namespace deepcmc {

// Round to nearest integer, ties half-to-even.
template <typename T>
Tensor<T> quantize(const Tensor<T>& m) {
    Tensor<T> q(m.shape());
    for (size_t i = 0; i < m.numel(); ++i) {
        if (!std::isfinite(static_cast<double>(m[i]))) {
            throw std::invalid_argument("quantize: non-finite input");
        }
        q[i] = static_cast<T>(std::nearbyint(static_cast<double>(m[i])));
    }
    return q;
}

// Training surrogate for quantization: independent draws from U[-0.5, 0.5].
template <typename T>
Tensor<T> add_uniform_noise(const Tensor<T>& m, std::mt19937_64& rng) {
    Tensor<T> out(m.shape());
    for (size_t i = 0; i < m.numel(); ++i) {
        const double u = (rng() >> 11) * 0x1.0p-53;  // [0,1)
        out[i] = m[i] + static_cast<T>(u - 0.5);
    }
    return out;
}

// Finalized 16-bit cumulative-frequency tables driving the range coder.
// One table per feature channel plus a trailing escape symbol; frequencies
// per channel sum to exactly 1<<16 and every symbol keeps >= 1 unit.
struct FrequencyTables {
    static constexpr uint32_t kTotalBits = 16;
    static constexpr uint32_t kTotal = 1u << kTotalBits;

    int k_min = 0;
    int k_max = -1;
    std::vector<std::vector<uint32_t>> freq;  // [channel][span+1], last entry = escape
    std::vector<std::vector<uint32_t>> cum;   // [channel][span+2] prefix sums

    int channels() const { return static_cast<int>(freq.size()); }
    int span() const { return k_max - k_min + 1; }
    bool finalized() const { return !freq.empty(); }
    int escape_index() const { return span(); }

    void build_cum() {
        cum.assign(freq.size(), {});
        for (size_t c = 0; c < freq.size(); ++c) {
            cum[c].resize(freq[c].size() + 1);
            cum[c][0] = 0;
            for (size_t i = 0; i < freq[c].size(); ++i) cum[c][i + 1] = cum[c][i] + freq[c][i];
            if (cum[c].back() != kTotal) {
                throw std::runtime_error("frequency table does not sum to 2^16");
            }
        }
    }
};

// Learned per-channel monotone cumulative function c: R -> (0,1), realized as
// three monotone stages of width kWidth (sign-constrained weights through
// softplus, tanh-gated nonlinearities, sigmoid head). Freshly initialized it
// equals the standard logistic CDF.
template <typename T>
struct EntropyModel {
    static constexpr int kWidth = 8;

    int channels = 0;
    int k_min = 0;   // coding support, set when finalizing
    int k_max = -1;

    // raw parameters; weights pass through softplus, gates through tanh
    Tensor<T> w1, b1, a1;  // (C,kWidth)
    Tensor<T> w2;          // (C,kWidth,kWidth)
    Tensor<T> b2, a2;      // (C,kWidth)
    Tensor<T> w3;          // (C,kWidth)
    Tensor<T> b3;          // (C)

    static EntropyModel init(int num_channels) {
        EntropyModel m;
        m.channels = num_channels;
        const int W = kWidth;
        m.w1 = Tensor<T>({num_channels, W});
        m.b1 = Tensor<T>({num_channels, W});
        m.a1 = Tensor<T>({num_channels, W});
        m.w2 = Tensor<T>({num_channels, W, W});
        m.b2 = Tensor<T>({num_channels, W});
        m.a2 = Tensor<T>({num_channels, W});
        m.w3 = Tensor<T>({num_channels, W});
        m.b3 = Tensor<T>({num_channels});
        // softplus(raw) = 1/4 at every weight makes the initial composition
        // c(x) = sigmoid(x) exactly (8*8 paths, gain (1/4)^3 each).
        const T raw = static_cast<T>(std::log(std::exp(0.25) - 1.0));
        m.w1.fill(raw);
        m.w2.fill(raw);
        m.w3.fill(raw);
        return m;
    }
};

namespace detail {

template <typename T>
inline T softplus(T x) {
    // stable: log(1+e^x)
    if (x > T(20)) return x;
    return static_cast<T>(std::log1p(std::exp(static_cast<double>(x))));
}

template <typename T>
inline T sigmoid_stable(T x) {
    if (x >= T(0)) {
        const T e = static_cast<T>(std::exp(-static_cast<double>(x)));
        return T(1) / (T(1) + e);
    }
    const T e = static_cast<T>(std::exp(static_cast<double>(x)));
    return e / (T(1) + e);
}

}  // namespace detail

// Per-batch cache of the transformed (positive / gated) parameters so the
// per-element CDF evaluations skip the softplus/tanh transforms.
template <typename T>
struct PreparedPrior {
    int channels = 0;
    static constexpr int W = EntropyModel<T>::kWidth;
    std::vector<T> sw1, tanh_a1, sw2, sw3, tanh_a2;  // softplus(w*), tanh(a*)
    std::vector<T> dsw1, da1, dsw2, dsw3, da2;       // transform derivatives
    const EntropyModel<T>* model = nullptr;

    explicit PreparedPrior(const EntropyModel<T>& m) : channels(m.channels), model(&m) {
        const size_t cw = static_cast<size_t>(channels) * W;
        sw1.resize(cw);
        tanh_a1.resize(cw);
        da1.resize(cw);
        dsw1.resize(cw);
        sw2.resize(cw * W);
        dsw2.resize(cw * W);
        sw3.resize(cw);
        dsw3.resize(cw);
        da2.resize(cw);
        tanh_a2.resize(cw);
        for (size_t i = 0; i < cw; ++i) {
            sw1[i] = detail::softplus(m.w1[i]);
            dsw1[i] = detail::sigmoid_stable(m.w1[i]);
            tanh_a1[i] = static_cast<T>(std::tanh(static_cast<double>(m.a1[i])));
            da1[i] = T(1) - tanh_a1[i] * tanh_a1[i];
            sw3[i] = detail::softplus(m.w3[i]);
            dsw3[i] = detail::sigmoid_stable(m.w3[i]);
            tanh_a2[i] = static_cast<T>(std::tanh(static_cast<double>(m.a2[i])));
            da2[i] = T(1) - tanh_a2[i] * tanh_a2[i];
        }
        for (size_t i = 0; i < cw * W; ++i) {
            sw2[i] = detail::softplus(m.w2[i]);
            dsw2[i] = detail::sigmoid_stable(m.w2[i]);
        }
    }
};

// Scratch holding one CDF evaluation's intermediates for the backward pass.
template <typename T>
struct CdfTrace {
    static constexpr int W = EntropyModel<T>::kWidth;
    T x;
    T u1[W], t1[W], y1[W];
    T u2[W], t2[W], y2[W];
    T s, c;
};

template <typename T>
T cdf_forward(const PreparedPrior<T>& pp, int ch, T x,
              std::type_identity_t<CdfTrace<T>*> trace = nullptr) {
    constexpr int W = EntropyModel<T>::kWidth;
    const EntropyModel<T>& m = *pp.model;
    const size_t base = static_cast<size_t>(ch) * W;
    T y1[W], y2[W], u1[W], t1[W], u2[W], t2[W];
    for (int i = 0; i < W; ++i) {
        u1[i] = pp.sw1[base + i] * x + m.b1[base + i];
        t1[i] = static_cast<T>(std::tanh(static_cast<double>(u1[i])));
        y1[i] = u1[i] + pp.tanh_a1[base + i] * t1[i];
    }
    for (int j = 0; j < W; ++j) {
        T acc = m.b2[base + j];
        const size_t row = (base + j) * W;
        for (int i = 0; i < W; ++i) acc += pp.sw2[row + i] * y1[i];
        u2[j] = acc;
        t2[j] = static_cast<T>(std::tanh(static_cast<double>(u2[j])));
        y2[j] = u2[j] + pp.tanh_a2[base + j] * t2[j];
    }
    T s = m.b3[static_cast<size_t>(ch)];
    for (int j = 0; j < W; ++j) s += pp.sw3[base + j] * y2[j];
    const T c = detail::sigmoid_stable(s);
    if (trace != nullptr) {
        trace->x = x;
        for (int i = 0; i < W; ++i) {
            trace->u1[i] = u1[i];
            trace->t1[i] = t1[i];
            trace->y1[i] = y1[i];
            trace->u2[i] = u2[i];
            trace->t2[i] = t2[i];
            trace->y2[i] = y2[i];
        }
        trace->s = s;
        trace->c = c;
    }
    return c;
}

// Gradient sink for the prior parameters, shaped like the model tensors.
template <typename T>
struct EntropyModelGrads {
    Tensor<T> w1, b1, a1, w2, b2, a2, w3, b3;

    explicit EntropyModelGrads(const EntropyModel<T>& m)
        : w1(m.w1.shape()),
          b1(m.b1.shape()),
          a1(m.a1.shape()),
          w2(m.w2.shape()),
          b2(m.b2.shape()),
          a2(m.a2.shape()),
          w3(m.w3.shape()),
          b3(m.b3.shape()) {}
};

// Backpropagates g = dL/dc through one traced CDF evaluation. Accumulates
// parameter gradients and returns dL/dx.
template <typename T>
T cdf_backward(const PreparedPrior<T>& pp, int ch, const CdfTrace<T>& tr, T g,
               EntropyModelGrads<T>* grads) {
    constexpr int W = EntropyModel<T>::kWidth;
    const size_t base = static_cast<size_t>(ch) * W;
    const T ds = g * tr.c * (T(1) - tr.c);
    T dy2[W], du2[W], dy1[W], du1[W];
    for (int j = 0; j < W; ++j) dy2[j] = ds * pp.sw3[base + j];
    for (int j = 0; j < W; ++j) {
        du2[j] = dy2[j] * (T(1) + pp.tanh_a2[base + j] * (T(1) - tr.t2[j] * tr.t2[j]));
    }
    for (int i = 0; i < W; ++i) {
        T acc = 0;
        for (int j = 0; j < W; ++j) acc += du2[j] * pp.sw2[(base + j) * W + i];
        dy1[i] = acc;
    }
    for (int i = 0; i < W; ++i) {
        du1[i] = dy1[i] * (T(1) + pp.tanh_a1[base + i] * (T(1) - tr.t1[i] * tr.t1[i]));
    }
    if (grads != nullptr) {
        grads->b3[static_cast<size_t>(ch)] += ds;
        for (int j = 0; j < W; ++j) {
            grads->w3[base + j] += ds * tr.y2[j] * pp.dsw3[base + j];
            grads->a2[base + j] += dy2[j] * tr.t2[j] * pp.da2[base + j];
            grads->b2[base + j] += du2[j];
            const size_t row = (base + j) * W;
            for (int i = 0; i < W; ++i) {
                grads->w2[row + i] += du2[j] * tr.y1[i] * pp.dsw2[row + i];
            }
        }
        for (int i = 0; i < W; ++i) {
            grads->a1[base + i] += dy1[i] * tr.t1[i] * pp.da1[base + i];
            grads->b1[base + i] += du1[i];
            grads->w1[base + i] += du1[i] * tr.x * pp.dsw1[base + i];
        }
    }
    T dx = 0;
    for (int i = 0; i < W; ++i) dx += du1[i] * pp.sw1[base + i];
    return dx;
}

// Floor keeping the training-mode bin probability strictly positive without a
// kink that would break finite-difference checks.
inline constexpr double kProbFloor = 1e-9;

// Continuous bin probability p(k) = c(k+1/2) - c(k-1/2) of the raw model.
template <typename T>
T bin_probability_raw(const PreparedPrior<T>& pp, int ch, T x) {
    const T hi = cdf_forward<T>(pp, ch, x + static_cast<T>(0.5), nullptr);
    const T lo = cdf_forward<T>(pp, ch, x - static_cast<T>(0.5), nullptr);
    return hi - lo + static_cast<T>(kProbFloor);
}

// Finalized-table probability; symbols outside [k_min, k_max] get the escape
// mass. Requires build from finalize_tables.
inline double bin_probability_coded(const FrequencyTables& t, int ch, long k) {
    if (!t.finalized()) throw std::runtime_error("entropy model tables not finalized");
    if (ch < 0 || ch >= t.channels()) throw std::out_of_range("bin_probability: bad channel");
    if (k < t.k_min || k > t.k_max) {
        return static_cast<double>(t.freq[static_cast<size_t>(ch)].back()) / FrequencyTables::kTotal;
    }
    return static_cast<double>(t.freq[static_cast<size_t>(ch)][static_cast<size_t>(k - t.k_min)]) /
           FrequencyTables::kTotal;
}

// Ideal codelength in bits of a symbol stream under finalized tables, with
// channel_of(i) = (i / plane) % channels.
inline double ideal_codelength_bits(const std::vector<int32_t>& symbols,
                                    const FrequencyTables& t, size_t plane) {
    double bits = 0;
    for (size_t i = 0; i < symbols.size(); ++i) {
        const int ch = static_cast<int>((i / plane) % static_cast<size_t>(t.channels()));
        bits -= std::log2(bin_probability_coded(t, ch, symbols[i]));
    }
    return bits;
}

// Quantizes the model to 16-bit integer frequencies over [k_min, k_max] plus
// an escape symbol. Largest-remainder allocation with a floor of one unit per
// symbol; each channel sums to exactly 2^16.
template <typename T>
FrequencyTables finalize_tables(const EntropyModel<T>& model, int k_min, int k_max) {
    if (k_max < k_min) throw std::invalid_argument("finalize_tables: empty support");
    FrequencyTables t;
    t.k_min = k_min;
    t.k_max = k_max;
    const int span = k_max - k_min + 1;
    const int nsym = span + 1;  // + escape
    if (static_cast<uint32_t>(nsym) > FrequencyTables::kTotal / 2) {
        throw std::invalid_argument("finalize_tables: support too wide for 16-bit precision");
    }
    PreparedPrior<T> pp(model);
    t.freq.assign(static_cast<size_t>(model.channels), {});
    for (int ch = 0; ch < model.channels; ++ch) {
        std::vector<double> p(static_cast<size_t>(nsym));
        double lo = cdf_forward<T>(pp, ch, static_cast<T>(k_min) - static_cast<T>(0.5), nullptr);
        const double head = lo;
        for (int k = k_min; k <= k_max; ++k) {
            const double hi =
                cdf_forward<T>(pp, ch, static_cast<T>(k) + static_cast<T>(0.5), nullptr);
            p[static_cast<size_t>(k - k_min)] = std::max(0.0, hi - lo);
            lo = hi;
        }
        p[static_cast<size_t>(span)] = std::max(0.0, head + (1.0 - lo));  // escape = both tails
        double total = 0;
        for (double v : p) total += v;
        if (total <= 0) total = 1.0;

        const uint32_t budget = FrequencyTables::kTotal - static_cast<uint32_t>(nsym);
        std::vector<uint32_t>& f = t.freq[static_cast<size_t>(ch)];
        f.assign(static_cast<size_t>(nsym), 1);
        std::vector<std::pair<double, int>> rema(static_cast<size_t>(nsym));
        uint32_t assigned = 0;
        for (int i = 0; i < nsym; ++i) {
            const double share = p[static_cast<size_t>(i)] / total * budget;
            const uint32_t fl = static_cast<uint32_t>(share);
            f[static_cast<size_t>(i)] += fl;
            assigned += fl;
            rema[static_cast<size_t>(i)] = {share - fl, i};
        }
        // hand leftover units to the largest remainders; ties to lower index
        std::stable_sort(rema.begin(), rema.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (uint32_t r = 0; r < budget - assigned; ++r) {
            f[static_cast<size_t>(rema[r % rema.size()].second)] += 1;
        }
    }
    t.build_cum();
    return t;
}

}  // namespace deepcmc

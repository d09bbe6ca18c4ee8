#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "deepcmc/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deepcmc::nn {

// ---------------------------------------------------------------------------
// Layer parameters

template <typename T>
struct Conv2d {
    Tensor<T> kernels;  // (out_ch, in_ch, kh, kw), kh/kw odd
    Tensor<T> bias;     // (out_ch)

    int out_channels() const { return kernels.dim(0); }
    int in_channels() const { return kernels.dim(1); }
};

template <typename T>
struct Conv2dGrads {
    Tensor<T> kernels;
    Tensor<T> bias;
};

template <typename T>
struct Prelu {
    Tensor<T> slope;  // (ch)
};

template <typename T>
struct BatchNorm {
    Tensor<T> gamma;         // (ch)
    Tensor<T> beta;          // (ch)
    Tensor<T> running_mean;  // (ch)
    Tensor<T> running_var;   // (ch), entries >= 0
    int64_t updates = 0;     // 0 means running stats are uninitialized
};

template <typename T>
struct BatchNormGrads {
    Tensor<T> gamma;
    Tensor<T> beta;
};

// Cached batch statistics from a training-mode forward pass.
template <typename T>
struct BnCache {
    Tensor<T> x_hat;            // normalized input, shaped like x
    std::vector<T> inv_std;     // (ch)
    const Tensor<T>* x = nullptr;
};

inline int check_factor(int dim, int factor, const char* what) {
    if (factor < 1) throw ShapeError(std::string(what) + ": factor must be >= 1");
    if (dim % factor != 0) {
        throw ShapeError(std::string(what) + ": spatial dim " + std::to_string(dim) +
                         " not divisible by factor " + std::to_string(factor));
    }
    return dim / factor;
}

// ---------------------------------------------------------------------------
// 2-D convolution, SAME zero padding, stride 1

template <typename T>
inline void check_conv_shapes(const Chw& s, const Conv2d<T>& p) {
    if (p.kernels.rank() != 4) {
        throw ShapeError("conv2d: kernels must be rank 4, got " + p.kernels.shape_str());
    }
    const int kh = p.kernels.dim(2), kw = p.kernels.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw ShapeError("conv2d: kernel dims must be odd for symmetric SAME padding, got " +
                         p.kernels.shape_str());
    }
    if (p.kernels.dim(1) != s.c) {
        throw ShapeError("conv2d: input has " + std::to_string(s.c) +
                         " channels but kernels expect " + std::to_string(p.kernels.dim(1)));
    }
    if (p.bias.rank() != 1 || p.bias.dim(0) != p.kernels.dim(0)) {
        throw ShapeError("conv2d: bias shape " + p.bias.shape_str() +
                         " does not match out-channels " + std::to_string(p.kernels.dim(0)));
    }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2d<T>& p) {
    const Chw s = as_nchw(x, "conv2d");
    check_conv_shapes(s, p);
    const int oc_n = p.kernels.dim(0), kh_n = p.kernels.dim(2), kw_n = p.kernels.dim(3);
    const int ph = kh_n / 2, pw = kw_n / 2;
    const int H = s.h, W = s.w;

    Tensor<T> y = make_like(x, {s.n, oc_n, H, W});
    const T* xd = x.data();
    T* yd = y.data();
    const T* kd = p.kernels.data();
    const size_t in_plane = static_cast<size_t>(H) * W;
    const size_t in_sample = static_cast<size_t>(s.c) * in_plane;
    const size_t out_sample = static_cast<size_t>(oc_n) * in_plane;

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int oc = 0; oc < oc_n; ++oc) {
            T* yplane = yd + n * out_sample + static_cast<size_t>(oc) * in_plane;
            const T b = p.bias[static_cast<size_t>(oc)];
            std::fill(yplane, yplane + in_plane, b);
            for (int ic = 0; ic < s.c; ++ic) {
                const T* xplane = xd + n * in_sample + static_cast<size_t>(ic) * in_plane;
                const T* kplane =
                    kd + (static_cast<size_t>(oc) * s.c + ic) * kh_n * kw_n;
                for (int kh = 0; kh < kh_n; ++kh) {
                    const int oh_lo = std::max(0, ph - kh);
                    const int oh_hi = std::min(H, H + ph - kh);
                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                        const T* xrow = xplane + static_cast<size_t>(oh + kh - ph) * W;
                        T* yrow = yplane + static_cast<size_t>(oh) * W;
                        for (int kw = 0; kw < kw_n; ++kw) {
                            const T wv = kplane[kh * kw_n + kw];
                            const int shift = kw - pw;
                            const int lo = std::max(0, -shift);
                            const int hi = std::min(W, W - shift);
                            const T* xs = xrow + shift;
                            for (int ow = lo; ow < hi; ++ow) {
                                yrow[ow] += wv * xs[ow];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

// Exact gradients of conv2d under zero SAME padding. gx may be null when the
// input gradient is not needed (first layer).
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Conv2d<T>& p, const Tensor<T>& gy,
                               Tensor<T>* gx) {
    const Chw s = as_nchw(x, "conv2d_backward");
    check_conv_shapes(s, p);
    const Chw gs = as_nchw(gy, "conv2d_backward");
    const int oc_n = p.kernels.dim(0), kh_n = p.kernels.dim(2), kw_n = p.kernels.dim(3);
    if (gs.n != s.n || gs.c != oc_n || gs.h != s.h || gs.w != s.w) {
        throw ShapeError("conv2d_backward: upstream grad " + gy.shape_str() +
                         " does not match conv output shape");
    }
    const int ph = kh_n / 2, pw = kw_n / 2;
    const int H = s.h, W = s.w;
    const size_t plane = static_cast<size_t>(H) * W;
    const size_t in_sample = static_cast<size_t>(s.c) * plane;
    const size_t out_sample = static_cast<size_t>(oc_n) * plane;
    const T* xd = x.data();
    const T* gd = gy.data();

    Conv2dGrads<T> grads{Tensor<T>(p.kernels.shape()), Tensor<T>(p.bias.shape())};

    // kernel gradient: one independent reduction per (oc, ic)
    T* kg = grads.kernels.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < oc_n; ++oc) {
        for (int ic = 0; ic < s.c; ++ic) {
            T* kgplane = kg + (static_cast<size_t>(oc) * s.c + ic) * kh_n * kw_n;
            for (int kh = 0; kh < kh_n; ++kh) {
                for (int kw = 0; kw < kw_n; ++kw) {
                    const int shift = kw - pw;
                    const int lo = std::max(0, -shift);
                    const int hi = std::min(W, W - shift);
                    T acc = 0;
                    for (int n = 0; n < s.n; ++n) {
                        const T* gplane = gd + n * out_sample + static_cast<size_t>(oc) * plane;
                        const T* xplane = xd + n * in_sample + static_cast<size_t>(ic) * plane;
                        const int oh_lo = std::max(0, ph - kh);
                        const int oh_hi = std::min(H, H + ph - kh);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* grow = gplane + static_cast<size_t>(oh) * W;
                            const T* xrow =
                                xplane + static_cast<size_t>(oh + kh - ph) * W + shift;
                            T dot = 0;
#pragma omp simd reduction(+ : dot)
                            for (int ow = lo; ow < hi; ++ow) {
                                dot += grow[ow] * xrow[ow];
                            }
                            acc += dot;
                        }
                    }
                    kgplane[kh * kw_n + kw] = acc;
                }
            }
        }
    }

    // bias gradient
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < oc_n; ++oc) {
        T acc = 0;
        for (int n = 0; n < s.n; ++n) {
            const T* gplane = gd + n * out_sample + static_cast<size_t>(oc) * plane;
#pragma omp simd reduction(+ : acc)
            for (size_t i = 0; i < plane; ++i) acc += gplane[i];
        }
        grads.bias[static_cast<size_t>(oc)] = acc;
    }

    // input gradient: correlation of gy with the kernel flipped in both axes
    if (gx != nullptr) {
        *gx = make_like(x, s);
        T* gxd = gx->data();
        const T* kd = p.kernels.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < s.n; ++n) {
            for (int ic = 0; ic < s.c; ++ic) {
                T* gxplane = gxd + n * in_sample + static_cast<size_t>(ic) * plane;
                for (int oc = 0; oc < oc_n; ++oc) {
                    const T* gplane = gd + n * out_sample + static_cast<size_t>(oc) * plane;
                    const T* kplane =
                        kd + (static_cast<size_t>(oc) * s.c + ic) * kh_n * kw_n;
                    for (int kh = 0; kh < kh_n; ++kh) {
                        // gx[ih][iw] += k[kh][kw] * gy[ih - kh + ph][iw - kw + pw]
                        const int ih_lo = std::max(0, kh - ph);
                        const int ih_hi = std::min(H, H + kh - ph);
                        for (int ih = ih_lo; ih < ih_hi; ++ih) {
                            const T* grow = gplane + static_cast<size_t>(ih - kh + ph) * W;
                            T* gxrow = gxplane + static_cast<size_t>(ih) * W;
                            for (int kw = 0; kw < kw_n; ++kw) {
                                const T wv = kplane[kh * kw_n + kw];
                                const int shift = pw - kw;
                                const int lo = std::max(0, -shift);
                                const int hi = std::min(W, W - shift);
                                const T* gsrc = grow + shift;
                                for (int iw = lo; iw < hi; ++iw) {
                                    gxrow[iw] += wv * gsrc[iw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// PReLU: y = x for x >= 0, y = slope[c] * x otherwise

template <typename T>
inline void check_channel_param(const Chw& s, const Tensor<T>& param, const char* what) {
    if (param.rank() != 1 || param.dim(0) != s.c) {
        throw ShapeError(std::string(what) + ": per-channel param " + param.shape_str() +
                         " does not match " + std::to_string(s.c) + " channels");
    }
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Prelu<T>& p) {
    const Chw s = as_nchw(x, "prelu");
    check_channel_param(s, p.slope, "prelu");
    Tensor<T> y = make_like(x, s);
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const T* xd = x.data();
    T* yd = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const T a = p.slope[static_cast<size_t>(c)];
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const T v = xd[off + i];
                yd[off + i] = v >= T(0) ? v : a * v;
            }
        }
    }
    return y;
}

template <typename T>
void prelu_backward(const Tensor<T>& x, const Prelu<T>& p, const Tensor<T>& gy, Tensor<T>& gx,
                    Tensor<T>& gslope) {
    const Chw s = as_nchw(x, "prelu_backward");
    check_channel_param(s, p.slope, "prelu_backward");
    if (!gy.same_shape(x)) throw ShapeError("prelu_backward: grad shape mismatch");
    gx = make_like(x, s);
    gslope = Tensor<T>(p.slope.shape());
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const T* xd = x.data();
    const T* gd = gy.data();
    T* gxd = gx.data();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
        const T a = p.slope[static_cast<size_t>(c)];
        T ga = 0;
        for (int n = 0; n < s.n; ++n) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const T v = xd[off + i];
                const T g = gd[off + i];
                if (v >= T(0)) {
                    gxd[off + i] = g;
                } else {
                    gxd[off + i] = a * g;
                    ga += v * g;
                }
            }
        }
        gslope[static_cast<size_t>(c)] = ga;
    }
}

// ---------------------------------------------------------------------------
// Batch normalization (per channel over batch x spatial)

template <typename T>
Tensor<T> batch_norm_train(const Tensor<T>& x, BatchNorm<T>& p, T momentum, T eps,
                           BnCache<T>& cache) {
    const Chw s = as_nchw(x, "batch_norm");
    check_channel_param(s, p.gamma, "batch_norm");
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const size_t count = static_cast<size_t>(s.n) * plane;
    if (count < 2) {
        throw ShapeError("batch_norm: train mode needs batch*spatial count >= 2 per channel, got " +
                         std::to_string(count));
    }
    Tensor<T> y = make_like(x, s);
    cache.x_hat = make_like(x, s);
    cache.inv_std.assign(static_cast<size_t>(s.c), T(0));
    cache.x = &x;
    const T* xd = x.data();
    T* yd = y.data();
    T* hd = cache.x_hat.data();

#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
        double sum = 0, sq = 0;
        for (int n = 0; n < s.n; ++n) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const double v = xd[off + i];
                sum += v;
                sq += v * v;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
        const T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        cache.inv_std[static_cast<size_t>(c)] = inv;
        const T g = p.gamma[static_cast<size_t>(c)];
        const T b = p.beta[static_cast<size_t>(c)];
        const T m = static_cast<T>(mean);
        for (int n = 0; n < s.n; ++n) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const T xh = (xd[off + i] - m) * inv;
                hd[off + i] = xh;
                yd[off + i] = g * xh + b;
            }
        }
        p.running_mean[static_cast<size_t>(c)] =
            momentum * p.running_mean[static_cast<size_t>(c)] + (T(1) - momentum) * m;
        p.running_var[static_cast<size_t>(c)] =
            momentum * p.running_var[static_cast<size_t>(c)] + (T(1) - momentum) * static_cast<T>(var);
    }
    p.updates += 1;
    return y;
}

template <typename T>
Tensor<T> batch_norm_infer(const Tensor<T>& x, const BatchNorm<T>& p, T eps) {
    const Chw s = as_nchw(x, "batch_norm");
    check_channel_param(s, p.gamma, "batch_norm");
    if (p.updates == 0) {
        throw std::runtime_error("batch_norm: inference with uninitialized running stats");
    }
    Tensor<T> y = make_like(x, s);
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const T* xd = x.data();
    T* yd = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const T inv = T(1) / std::sqrt(p.running_var[static_cast<size_t>(c)] + eps);
            const T g = p.gamma[static_cast<size_t>(c)];
            const T b = p.beta[static_cast<size_t>(c)];
            const T m = p.running_mean[static_cast<size_t>(c)];
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                yd[off + i] = g * (xd[off + i] - m) * inv + b;
            }
        }
    }
    return y;
}

template <typename T>
void batch_norm_backward(const BnCache<T>& cache, const BatchNorm<T>& p, const Tensor<T>& gy,
                         Tensor<T>& gx, BatchNormGrads<T>& grads) {
    const Tensor<T>& x_hat = cache.x_hat;
    const Chw s = as_nchw(x_hat, "batch_norm_backward");
    if (!gy.same_shape(x_hat)) throw ShapeError("batch_norm_backward: grad shape mismatch");
    gx = make_like(x_hat, s);
    grads.gamma = Tensor<T>(p.gamma.shape());
    grads.beta = Tensor<T>(p.beta.shape());
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const size_t count = static_cast<size_t>(s.n) * plane;
    const T* hd = x_hat.data();
    const T* gd = gy.data();
    T* gxd = gx.data();

#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
        double sum_g = 0, sum_gh = 0;
        for (int n = 0; n < s.n; ++n) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                sum_g += gd[off + i];
                sum_gh += gd[off + i] * static_cast<double>(hd[off + i]);
            }
        }
        grads.beta[static_cast<size_t>(c)] = static_cast<T>(sum_g);
        grads.gamma[static_cast<size_t>(c)] = static_cast<T>(sum_gh);
        const T mean_g = static_cast<T>(sum_g / static_cast<double>(count));
        const T mean_gh = static_cast<T>(sum_gh / static_cast<double>(count));
        const T scale = p.gamma[static_cast<size_t>(c)] * cache.inv_std[static_cast<size_t>(c)];
        for (int n = 0; n < s.n; ++n) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                gxd[off + i] = scale * (gd[off + i] - mean_g - hd[off + i] * mean_gh);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Average pooling and nearest-neighbor upsampling (exact adjoint pair)

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int factor) {
    const Chw s = as_nchw(x, "avg_pool");
    const int oh = check_factor(s.h, factor, "avg_pool");
    const int ow = check_factor(s.w, factor, "avg_pool");
    Tensor<T> y = make_like(x, {s.n, s.c, oh, ow});
    const T inv = T(1) / static_cast<T>(factor * factor);
    const size_t in_plane = static_cast<size_t>(s.h) * s.w;
    const size_t out_plane = static_cast<size_t>(oh) * ow;
    const T* xd = x.data();
    T* yd = y.data();
    const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (int pc = 0; pc < planes; ++pc) {
        const T* xp = xd + static_cast<size_t>(pc) * in_plane;
        T* yp = yd + static_cast<size_t>(pc) * out_plane;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                T acc = 0;
                for (int di = 0; di < factor; ++di) {
                    const T* row = xp + static_cast<size_t>(i * factor + di) * s.w + j * factor;
                    for (int dj = 0; dj < factor; ++dj) acc += row[dj];
                }
                yp[static_cast<size_t>(i) * ow + j] = acc * inv;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
    const Chw s = as_nchw(x, "upsample_nearest");
    if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
    const int oh = s.h * factor, ow = s.w * factor;
    Tensor<T> y = make_like(x, {s.n, s.c, oh, ow});
    const size_t in_plane = static_cast<size_t>(s.h) * s.w;
    const size_t out_plane = static_cast<size_t>(oh) * ow;
    const T* xd = x.data();
    T* yd = y.data();
    const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (int pc = 0; pc < planes; ++pc) {
        const T* xp = xd + static_cast<size_t>(pc) * in_plane;
        T* yp = yd + static_cast<size_t>(pc) * out_plane;
        for (int i = 0; i < oh; ++i) {
            const T* row = xp + static_cast<size_t>(i / factor) * s.w;
            T* orow = yp + static_cast<size_t>(i) * ow;
            for (int j = 0; j < ow; ++j) orow[j] = row[j / factor];
        }
    }
    return y;
}

// Adjoint of avg_pool: spread each output grad uniformly over its block.
template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T>& gy, int factor) {
    Tensor<T> g = upsample_nearest(gy, factor);
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (size_t i = 0; i < g.numel(); ++i) g[i] *= inv;
    return g;
}

// Adjoint of upsample_nearest: sum each block back to its source entry.
template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& gy, int factor) {
    Tensor<T> g = avg_pool(gy, factor);
    const T f2 = static_cast<T>(factor * factor);
    for (size_t i = 0; i < g.numel(); ++i) g[i] *= f2;
    return g;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamConfig {
    T lr = static_cast<T>(1e-4);
    T beta1 = static_cast<T>(0.9);
    T beta2 = static_cast<T>(0.999);
    T eps = static_cast<T>(1e-8);
};

template <typename T>
struct AdamState {
    int64_t step = 0;
    Tensor<T> first_moment;   // zero-initialized
    Tensor<T> second_moment;  // entries >= 0

    explicit AdamState(const std::vector<int>& shape)
        : first_moment(shape), second_moment(shape) {}
    AdamState() = default;
};

template <typename T>
void adam_step(AdamState<T>& st, const AdamConfig<T>& cfg, Tensor<T>& param,
               const Tensor<T>& grad) {
    if (!param.same_shape(grad) || !param.same_shape(st.first_moment)) {
        throw ShapeError("adam_step: state/param/grad shape mismatch");
    }
    st.step += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg.beta1),
                                                 static_cast<double>(st.step)));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg.beta2),
                                                 static_cast<double>(st.step)));
    T* p = param.data();
    T* m = st.first_moment.data();
    T* v = st.second_moment.data();
    const T* g = grad.data();
    const size_t n = param.numel();
    for (size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (T(1) - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (T(1) - cfg.beta2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// ---------------------------------------------------------------------------
// He-style initialization suited to PReLU

template <typename T>
void init_conv(Conv2d<T>& p, int out_ch, int in_ch, int k, std::mt19937_64& rng) {
    p.kernels = Tensor<T>({out_ch, in_ch, k, k});
    p.bias = Tensor<T>({out_ch});
    const double fan_in = static_cast<double>(in_ch) * k * k;
    const double bound = std::sqrt(6.0 / fan_in);  // uniform with variance 2/fan_in
    for (size_t i = 0; i < p.kernels.numel(); ++i) {
        const double u = (rng() >> 11) * 0x1.0p-53;
        p.kernels[i] = static_cast<T>((2.0 * u - 1.0) * bound);
    }
}

template <typename T>
void init_prelu(Prelu<T>& p, int ch) {
    p.slope = Tensor<T>({ch});
    p.slope.fill(static_cast<T>(0.25));
}

template <typename T>
void init_batch_norm(BatchNorm<T>& p, int ch) {
    p.gamma = Tensor<T>({ch});
    p.gamma.fill(T(1));
    p.beta = Tensor<T>({ch});
    p.running_mean = Tensor<T>({ch});
    p.running_var = Tensor<T>({ch});
    p.running_var.fill(T(1));
    p.updates = 0;
}

}  // namespace deepcmc::nn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "deepcmc/nn.hpp"
#include "gradcheck.hpp"

using namespace deepcmc;

namespace {

// independent nested-loop convolution oracle (zero SAME padding)
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& k,
                              const Tensor<double>& bias) {
    const Chw s = as_nchw(x, "ref");
    const int oc_n = k.dim(0), ic_n = k.dim(1), kh_n = k.dim(2), kw_n = k.dim(3);
    const int ph = kh_n / 2, pw = kw_n / 2;
    Tensor<double> y = make_like(x, {s.n, oc_n, s.h, s.w});
    for (int n = 0; n < s.n; ++n)
        for (int oc = 0; oc < oc_n; ++oc)
            for (int oh = 0; oh < s.h; ++oh)
                for (int ow = 0; ow < s.w; ++ow) {
                    double acc = bias[static_cast<size_t>(oc)];
                    for (int ic = 0; ic < ic_n; ++ic)
                        for (int kh = 0; kh < kh_n; ++kh)
                            for (int kw = 0; kw < kw_n; ++kw) {
                                const int ih = oh + kh - ph, iw = ow + kw - pw;
                                if (ih < 0 || ih >= s.h || iw < 0 || iw >= s.w) continue;
                                const size_t xi =
                                    ((static_cast<size_t>(n) * s.c + ic) * s.h + ih) * s.w + iw;
                                const size_t ki =
                                    ((static_cast<size_t>(oc) * ic_n + ic) * kh_n + kh) * kw_n + kw;
                                acc += x[xi] * k[ki];
                            }
                    const size_t yi = ((static_cast<size_t>(n) * oc_n + oc) * s.h + oh) * s.w + ow;
                    y[yi] = acc;
                }
    return y;
}

template <typename T>
nn::Conv2d<T> make_conv(const Tensor<T>& kernels) {
    nn::Conv2d<T> c;
    c.kernels = kernels;
    c.bias = Tensor<T>({kernels.dim(0)});
    return c;
}

}  // namespace

TEST_CASE("conv2d scalar product") {
    nn::Conv2d<float> c = make_conv(Tensor<float>({1, 1, 1, 1}, {3.0f}));
    Tensor<float> x({1, 1, 1}, {2.0f});
    Tensor<float> y = nn::conv2d(x, c);
    CHECK(y.shape() == std::vector<int>{1, 1, 1});
    CHECK(y[0] == doctest::Approx(6.0f));
}

TEST_CASE("conv2d delta kernel is the identity") {
    std::mt19937_64 rng(7);
    Tensor<float> x({2, 5, 7});
    for (size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>((rng() >> 11) * 0x1.0p-53 - 0.5);
    Tensor<float> k({2, 2, 3, 3});
    for (int o = 0; o < 2; ++o) k[((o * 2 + o) * 3 + 1) * 3 + 1] = 1.0f;  // center taps
    Tensor<float> y = nn::conv2d(x, make_conv(k));
    REQUIRE(y.same_shape(x));
    for (size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d 3x3 ones against the nested-loop oracle") {
    Tensor<double> x({1, 3, 3});
    x.fill(1.0);
    Tensor<double> k({1, 1, 3, 3});
    k.fill(1.0);
    Tensor<double> b({1});
    Tensor<double> y = nn::conv2d(x, make_conv(k));
    const std::vector<double> expected = {4, 6, 4, 6, 9, 6, 4, 6, 4};  // frozen from the oracle
    Tensor<double> ref = conv_reference(x, k, b);
    for (size_t i = 0; i < 9; ++i) {
        CHECK(ref[i] == doctest::Approx(expected[i]));
        CHECK(y[i] == doctest::Approx(expected[i]));
    }
}

TEST_CASE("conv2d matches the oracle on random shapes") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 2);
        const int ic = 1 + static_cast<int>(rng() % 3);
        const int oc = 1 + static_cast<int>(rng() % 4);
        const int h = 1 + static_cast<int>(rng() % 7);
        const int w = 1 + static_cast<int>(rng() % 7);
        const int k = 2 * static_cast<int>(rng() % 3) + 1;  // 1,3,5
        Tensor<double> x({n, ic, h, w}), kt({oc, ic, k, k}), bias({oc});
        gradcheck::fill_uniform(x, rng, -1, 1);
        gradcheck::fill_uniform(kt, rng, -1, 1);
        gradcheck::fill_uniform(bias, rng, -1, 1);
        nn::Conv2d<double> conv{kt, bias};
        Tensor<double> y = nn::conv2d(x, conv);
        Tensor<double> ref = conv_reference(x, kt, bias);
        REQUIRE(y.same_shape(ref));
        for (size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(y.dim(2) == h);  // SAME contract for every odd kernel
        CHECK(y.dim(3) == w);
    }
}

TEST_CASE("conv2d rejects shape mismatches") {
    nn::Conv2d<float> c = make_conv(Tensor<float>({1, 2, 3, 3}));
    CHECK_THROWS_AS(nn::conv2d(Tensor<float>({1, 4, 4}), c), ShapeError);
    nn::Conv2d<float> even = make_conv(Tensor<float>({1, 1, 2, 2}));
    CHECK_THROWS_AS(nn::conv2d(Tensor<float>({1, 4, 4}), even), ShapeError);
    CHECK_THROWS_AS(nn::conv2d_backward(Tensor<float>({2, 4, 4}), c, Tensor<float>({1, 3, 3}),
                                        static_cast<Tensor<float>*>(nullptr)),
                    ShapeError);
}

TEST_CASE("conv2d_backward zero upstream and scalar case") {
    nn::Conv2d<float> c = make_conv(Tensor<float>({1, 1, 1, 1}, {3.0f}));
    Tensor<float> x({1, 1, 1}, {2.0f});

    Tensor<float> gx;
    auto zero = nn::conv2d_backward(x, c, Tensor<float>({1, 1, 1}), &gx);
    CHECK(gx[0] == 0.0f);
    CHECK(zero.kernels[0] == 0.0f);
    CHECK(zero.bias[0] == 0.0f);

    auto g = nn::conv2d_backward(x, c, Tensor<float>({1, 1, 1}, {1.0f}), &gx);
    CHECK(gx[0] == doctest::Approx(3.0f));
    CHECK(g.kernels[0] == doctest::Approx(2.0f));
    CHECK(g.bias[0] == doctest::Approx(1.0f));
}

template <typename T>
static void conv_grad_fd_case() {
    std::mt19937_64 rng(1234);
    Tensor<double> x({2, 8, 8}), k({4, 2, 5, 5}), bias({4}), weight({4, 8, 8});
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(k, rng, -0.5, 0.5);
    gradcheck::fill_uniform(bias, rng, -0.5, 0.5);
    gradcheck::fill_uniform(weight, rng, -1, 1);

    // analytic side at precision T
    nn::Conv2d<T> conv{k.template cast<T>(), bias.template cast<T>()};
    Tensor<T> gx;
    auto grads = nn::conv2d_backward(x.template cast<T>(), conv, weight.template cast<T>(), &gx);

    nn::Conv2d<double> dconv{k, bias};
    auto eval = [&]() { return gradcheck::weighted_sum(nn::conv2d(x, dconv), weight); };
    // the spec's pinned step; the op is linear so fd is exact up to rounding
    Tensor<double> fd_x = gradcheck::fd_gradient(x, eval, 1e-4);
    Tensor<double> fd_k = gradcheck::fd_gradient(dconv.kernels, eval, 1e-4);
    Tensor<double> fd_b = gradcheck::fd_gradient(dconv.bias, eval, 1e-4);

    auto rx = gradcheck::compare<T>(gx.template cast<double>(), fd_x);
    auto rk = gradcheck::compare<T>(grads.kernels.template cast<double>(), fd_k);
    auto rb = gradcheck::compare<T>(grads.bias.template cast<double>(), fd_b);
    CHECK_MESSAGE(rx.ok, "input grad worst score ", rx.worst);
    CHECK_MESSAGE(rk.ok, "kernel grad worst score ", rk.worst);
    CHECK_MESSAGE(rb.ok, "bias grad worst score ", rb.worst);
}

TEST_CASE("conv2d_backward finite differences, 32-bit") { conv_grad_fd_case<float>(); }
TEST_CASE("conv2d_backward finite differences, 64-bit") { conv_grad_fd_case<double>(); }

TEST_CASE("prelu forward branches") {
    nn::Prelu<float> p;
    p.slope = Tensor<float>({1}, {0.25f});
    Tensor<float> x({1, 1, 2}, {1.5f, -2.0f});
    Tensor<float> y = nn::prelu(x, p);
    CHECK(y[0] == doctest::Approx(1.5f));
    CHECK(y[1] == doctest::Approx(-0.5f));

    Tensor<float> gx, gs;
    Tensor<float> gy({1, 1, 2}, {1.0f, 1.0f});
    nn::prelu_backward(x, p, gy, gx, gs);
    CHECK(gs[0] == doctest::Approx(-2.0f));  // d/da on the negative entry equals x
    CHECK(gx[0] == doctest::Approx(1.0f));
    CHECK(gx[1] == doctest::Approx(0.25f));
}

TEST_CASE("prelu with unit slope is the identity") {
    std::mt19937_64 rng(3);
    nn::Prelu<float> p;
    p.slope = Tensor<float>({3});
    p.slope.fill(1.0f);
    Tensor<float> x({3, 4, 4});
    for (size_t i = 0; i < x.numel(); ++i)
        x[i] = static_cast<float>((rng() >> 11) * 0x1.0p-53 * 4 - 2);
    Tensor<float> y = nn::prelu(x, p);
    for (size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

template <typename T>
static void prelu_grad_fd_case() {
    std::mt19937_64 rng(77);
    Tensor<double> x({2, 3, 5, 5}), slope({3}), weight({2, 3, 5, 5});
    gradcheck::fill_uniform(x, rng, -2, 2);
    // keep entries away from the kink
    for (size_t i = 0; i < x.numel(); ++i)
        if (std::abs(x[i]) < 1e-2) x[i] = x[i] < 0 ? x[i] - 0.05 : x[i] + 0.05;
    gradcheck::fill_uniform(slope, rng, 0.05, 0.5);
    gradcheck::fill_uniform(weight, rng, -1, 1);

    nn::Prelu<T> p{slope.template cast<T>()};
    Tensor<T> gx, gs;
    nn::prelu_backward(x.template cast<T>(), p, weight.template cast<T>(), gx, gs);

    nn::Prelu<double> pd{slope};
    auto eval_x = [&]() { return gradcheck::weighted_sum(nn::prelu(x, pd), weight); };
    Tensor<double> fd_x = gradcheck::fd_gradient(x, eval_x);
    Tensor<double> fd_s = gradcheck::fd_gradient(pd.slope, eval_x);
    auto rx = gradcheck::compare<T>(gx.template cast<double>(), fd_x);
    auto rs = gradcheck::compare<T>(gs.template cast<double>(), fd_s);
    CHECK_MESSAGE(rx.ok, "prelu input grad worst ", rx.worst);
    CHECK_MESSAGE(rs.ok, "prelu slope grad worst ", rs.worst);
}

TEST_CASE("prelu finite differences, 32-bit") { prelu_grad_fd_case<float>(); }
TEST_CASE("prelu finite differences, 64-bit") { prelu_grad_fd_case<double>(); }

TEST_CASE("batch_norm normalizes {1,3} to {-1,1}") {
    nn::BatchNorm<float> bn;
    nn::init_batch_norm(bn, 1);
    nn::BnCache<float> cache;
    Tensor<float> x({2, 1, 1, 1}, {1.0f, 3.0f});
    Tensor<float> y = nn::batch_norm_train(x, bn, 0.9f, 1e-12f, cache);
    CHECK(y[0] == doctest::Approx(-1.0f).epsilon(1e-5));
    CHECK(y[1] == doctest::Approx(1.0f).epsilon(1e-5));
    CHECK(bn.updates == 1);
    // running stats moved toward the batch: mean 2, biased var 1
    CHECK(bn.running_mean[0] == doctest::Approx(0.9f * 0.0f + 0.1f * 2.0f));
    CHECK(bn.running_var[0] == doctest::Approx(0.9f * 1.0f + 0.1f * 1.0f));
}

TEST_CASE("batch_norm gamma zero collapses to beta") {
    nn::BatchNorm<float> bn;
    nn::init_batch_norm(bn, 2);
    bn.gamma.fill(0.0f);
    bn.beta[0] = 0.5f;
    bn.beta[1] = -1.5f;
    std::mt19937_64 rng(5);
    Tensor<float> x({2, 2, 3, 3});
    for (size_t i = 0; i < x.numel(); ++i)
        x[i] = static_cast<float>((rng() >> 11) * 0x1.0p-53 * 2 - 1);
    nn::BnCache<float> cache;
    Tensor<float> y = nn::batch_norm_train(x, bn, 0.9f, 1e-5f, cache);
    const size_t plane = 9;
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < plane; ++i)
                CHECK(y[(static_cast<size_t>(n) * 2 + c) * plane + i] ==
                      doctest::Approx(bn.beta[static_cast<size_t>(c)]));
}

TEST_CASE("batch_norm infer requires initialized stats and train needs two rows") {
    nn::BatchNorm<float> bn;
    nn::init_batch_norm(bn, 1);
    Tensor<float> x({1, 1, 1});
    CHECK_THROWS(nn::batch_norm_infer(x, bn, 1e-5f));
    nn::BnCache<float> cache;
    CHECK_THROWS_AS(nn::batch_norm_train(x, bn, 0.9f, 1e-5f, cache), ShapeError);
    Tensor<float> ok({1, 1, 2, 1});
    CHECK_NOTHROW(nn::batch_norm_train(ok, bn, 0.9f, 1e-5f, cache));
    CHECK_NOTHROW(nn::batch_norm_infer(x, bn, 1e-5f));
}

template <typename T>
static void bn_grad_fd_case() {
    std::mt19937_64 rng(4242);
    Tensor<double> x({2, 3, 4, 4}), weight({2, 3, 4, 4}), gamma({3}), beta({3});
    gradcheck::fill_uniform(x, rng, -2, 2);
    gradcheck::fill_uniform(weight, rng, -1, 1);
    gradcheck::fill_uniform(gamma, rng, 0.5, 1.5);
    gradcheck::fill_uniform(beta, rng, -0.5, 0.5);

    nn::BatchNorm<T> bn;
    nn::init_batch_norm(bn, 3);
    bn.gamma = gamma.template cast<T>();
    bn.beta = beta.template cast<T>();
    nn::BnCache<T> cache;
    nn::batch_norm_train(x.template cast<T>(), bn, static_cast<T>(0.9), static_cast<T>(1e-5),
                         cache);
    Tensor<T> gx;
    nn::BatchNormGrads<T> g;
    nn::batch_norm_backward(cache, bn, weight.template cast<T>(), gx, g);

    nn::BatchNorm<double> bnd;
    nn::init_batch_norm(bnd, 3);
    bnd.gamma = gamma;
    bnd.beta = beta;
    auto eval = [&]() {
        nn::BnCache<double> c;
        return gradcheck::weighted_sum(nn::batch_norm_train(x, bnd, 0.9, 1e-5, c), weight);
    };
    Tensor<double> fd_x = gradcheck::fd_gradient(x, eval);
    Tensor<double> fd_g = gradcheck::fd_gradient(bnd.gamma, eval);
    Tensor<double> fd_b = gradcheck::fd_gradient(bnd.beta, eval);
    auto rx = gradcheck::compare<T>(gx.template cast<double>(), fd_x);
    auto rg = gradcheck::compare<T>(g.gamma.template cast<double>(), fd_g);
    auto rb = gradcheck::compare<T>(g.beta.template cast<double>(), fd_b);
    CHECK_MESSAGE(rx.ok, "bn input grad worst ", rx.worst);
    CHECK_MESSAGE(rg.ok, "bn gamma grad worst ", rg.worst);
    CHECK_MESSAGE(rb.ok, "bn beta grad worst ", rb.worst);
}

TEST_CASE("batch_norm finite differences, 32-bit") { bn_grad_fd_case<float>(); }
TEST_CASE("batch_norm finite differences, 64-bit") { bn_grad_fd_case<double>(); }

TEST_CASE("avg_pool block mean and upsample replication") {
    Tensor<float> x({1, 2, 2}, {1, 3, 5, 7});
    Tensor<float> y = nn::avg_pool(x, 2);
    CHECK(y.shape() == std::vector<int>{1, 1, 1});
    CHECK(y[0] == doctest::Approx(4.0f));

    Tensor<float> u = nn::upsample_nearest(Tensor<float>({1, 1, 1}, {4.0f}), 2);
    CHECK(u.shape() == std::vector<int>{1, 2, 2});
    for (size_t i = 0; i < 4; ++i) CHECK(u[i] == 4.0f);

    CHECK_THROWS_AS(nn::avg_pool(Tensor<float>({1, 3, 3}), 2), ShapeError);
}

TEST_CASE("pool/upsample adjoint composition identities") {
    std::mt19937_64 rng(11);
    for (int factor : {2, 4}) {
        Tensor<float> x({2, 3, 4, 4});
        for (size_t i = 0; i < x.numel(); ++i)
            x[i] = static_cast<float>((rng() >> 11) * 0x1.0p-53 * 2 - 1);
        // pool(upsample(x)) == x exactly for power-of-two factors
        Tensor<float> round = nn::avg_pool(nn::upsample_nearest(x, factor), factor);
        REQUIRE(round.same_shape(x));
        for (size_t i = 0; i < x.numel(); ++i) CHECK(round[i] == x[i]);

        // upsample(pool(y)) == y on block-constant tensors
        Tensor<float> blocky = nn::upsample_nearest(x, factor);
        Tensor<float> back = nn::upsample_nearest(nn::avg_pool(blocky, factor), factor);
        for (size_t i = 0; i < blocky.numel(); ++i) CHECK(back[i] == blocky[i]);
    }
}

TEST_CASE("pool and upsample backwards are exact adjoints") {
    std::mt19937_64 rng(13);
    const int factor = 2;
    Tensor<double> x({1, 2, 4, 4}), y({1, 2, 2, 2});
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(y, rng, -1, 1);
    // <avg_pool(x), y> == <x, avg_pool_backward(y)>
    const double lhs = gradcheck::weighted_sum(nn::avg_pool(x, factor), y);
    const double rhs = gradcheck::weighted_sum(nn::avg_pool_backward(y, factor), x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    // <upsample(y), x> == <y, upsample_backward(x)>
    const double lhs2 = gradcheck::weighted_sum(nn::upsample_nearest(y, factor), x);
    const double rhs2 = gradcheck::weighted_sum(nn::upsample_nearest_backward(x, factor), y);
    CHECK(lhs2 == doctest::Approx(rhs2).epsilon(1e-12));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    nn::AdamState<float> st({4});
    nn::AdamConfig<float> cfg;
    Tensor<float> p({4}, {1.0f, -2.0f, 0.5f, 3.0f});
    const Tensor<float> orig = p;
    Tensor<float> g({4});
    for (int step = 0; step < 3; ++step) nn::adam_step(st, cfg, p, g);
    for (size_t i = 0; i < 4; ++i) CHECK(p[i] == orig[i]);
}

TEST_CASE("adam first step has magnitude ~lr") {
    nn::AdamState<float> st({2});
    nn::AdamConfig<float> cfg;
    cfg.lr = 1e-3f;
    Tensor<float> p({2}, {0.0f, 0.0f});
    Tensor<float> g({2}, {0.5f, -7.0f});
    nn::adam_step(st, cfg, p, g);
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(st.step == 1);
}

TEST_CASE("adam matches a hand-rolled scalar recursion over two steps") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g1 = 0.3, g2 = -0.8;
    // reference recursion
    double m = 0, v = 0, x = 1.0;
    for (int t = 1; t <= 2; ++t) {
        const double g = (t == 1) ? g1 : g2;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        x -= lr * mh / (std::sqrt(vh) + eps);
    }

    nn::AdamState<double> st({1});
    nn::AdamConfig<double> cfg{lr, b1, b2, eps};
    Tensor<double> p({1}, {1.0});
    nn::adam_step(st, cfg, p, Tensor<double>({1}, {g1}));
    nn::adam_step(st, cfg, p, Tensor<double>({1}, {g2}));
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
    CHECK(st.second_moment[0] >= 0.0);
}

TEST_CASE("forward ops are deterministic and finite") {
    std::mt19937_64 rng(21);
    Tensor<float> x({2, 2, 8, 8});
    for (size_t i = 0; i < x.numel(); ++i)
        x[i] = static_cast<float>((rng() >> 11) * 0x1.0p-53 * 2 - 1);
    nn::Conv2d<float> conv;
    std::mt19937_64 wrng(1);
    nn::init_conv(conv, 3, 2, 5, wrng);
    Tensor<float> y1 = nn::conv2d(x, conv);
    Tensor<float> y2 = nn::conv2d(x, conv);
    REQUIRE(y1.numel() == y2.numel());
    for (size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
    CHECK(y1.all_finite());
}

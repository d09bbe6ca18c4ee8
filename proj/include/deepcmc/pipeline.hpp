#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "deepcmc/bitstream.hpp"
#include "deepcmc/channel.hpp"
#include "deepcmc/codec_net.hpp"
#include "deepcmc/entropy_model.hpp"
#include "deepcmc/range_coder.hpp"

namespace deepcmc {

// ---------------------------------------------------------------------------
// Rate-distortion trade-off table shared by both ends; the wire carries only
// the 16-bit id.

inline constexpr std::array<double, 6> kLambdaTable = {1e4, 5e4, 1e5, 5e5, 1e6, 5e6};

inline double lambda_from_id(int id) {
    if (id < 0 || id >= static_cast<int>(kLambdaTable.size())) {
        throw std::out_of_range("lambda id " + std::to_string(id) + " outside table");
    }
    return kLambdaTable[static_cast<size_t>(id)];
}

inline int nearest_lambda_id(double lambda) {
    int best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < kLambdaTable.size(); ++i) {
        const double err = std::abs(std::log(lambda) - std::log(kLambdaTable[i]));
        if (err < best_err) {
            best_err = err;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Model bundle: everything a checkpoint carries.

template <typename T>
struct Model {
    CodecConfig cfg;
    int lambda_id = 0;
    T lambda = static_cast<T>(kLambdaTable[0]);
    T sigma_norm = T(1);
    FeatureEncoder<T> enc;
    FeatureDecoder<T> dec;
    EntropyModel<T> prior;
    FrequencyTables tables;
};

template <typename T>
Model<T> init_model(const CodecConfig& cfg, int lambda_id, uint64_t seed) {
    Model<T> m;
    m.cfg = cfg;
    m.lambda_id = lambda_id;
    m.lambda = static_cast<T>(lambda_from_id(lambda_id));
    std::mt19937_64 rng(Rng::derive(seed, 0xC0DECull));
    m.enc = init_encoder<T>(cfg, rng);
    m.dec = init_decoder<T>(cfg, rng);
    m.prior = EntropyModel<T>::init(cfg.latent_channels);
    return m;
}

enum class ParamKind { Trainable, State };

// Single source of parameter ordering: checkpoint records, Adam slots and
// gradient pairing all walk this list.
template <typename T, typename G, typename F>
void visit_model(Model<T>& m, G* grads, F&& f);

template <typename T>
struct ModelGrads {
    EncoderGrads<T> enc;
    DecoderGrads<T> dec;
    EntropyModelGrads<T> prior;

    explicit ModelGrads(const Model<T>& m) : prior(m.prior) {}
};

namespace detail {

template <typename T, typename F>
void visit_conv(nn::Conv2d<T>& c, nn::Conv2dGrads<T>* g, const std::string& prefix, F&& f) {
    f(prefix + ".kernels", ParamKind::Trainable, c.kernels, g ? &g->kernels : nullptr);
    f(prefix + ".bias", ParamKind::Trainable, c.bias, g ? &g->bias : nullptr);
}

template <typename T, typename F>
void visit_bn(nn::BatchNorm<T>& b, nn::BatchNormGrads<T>* g, const std::string& prefix, F&& f) {
    f(prefix + ".gamma", ParamKind::Trainable, b.gamma, g ? &g->gamma : nullptr);
    f(prefix + ".beta", ParamKind::Trainable, b.beta, g ? &g->beta : nullptr);
    f(prefix + ".running_mean", ParamKind::State, b.running_mean, nullptr);
    f(prefix + ".running_var", ParamKind::State, b.running_var, nullptr);
}

template <typename T, typename F>
void visit_stage(ConvStage<T>& s, ConvStageGrads<T>* g, const std::string& prefix, F&& f) {
    visit_conv(s.conv, g ? &g->conv : nullptr, prefix + ".conv", f);
    visit_bn(s.bn, g ? &g->bn : nullptr, prefix + ".bn", f);
    f(prefix + ".act.slope", ParamKind::Trainable, s.act.slope, g ? &g->slope : nullptr);
}

template <typename T, typename F>
void visit_rb(ResidualBlock<T>& rb, ResidualGrads<T>* g, const std::string& prefix, F&& f) {
    visit_conv(rb.conv1, g ? &g->conv1 : nullptr, prefix + ".conv1", f);
    visit_bn(rb.bn1, g ? &g->bn1 : nullptr, prefix + ".bn1", f);
    f(prefix + ".act.slope", ParamKind::Trainable, rb.act.slope, g ? &g->slope : nullptr);
    visit_conv(rb.conv2, g ? &g->conv2 : nullptr, prefix + ".conv2", f);
    visit_bn(rb.bn2, g ? &g->bn2 : nullptr, prefix + ".bn2", f);
}

}  // namespace detail

template <typename T, typename G, typename F>
void visit_model(Model<T>& m, G* grads, F&& f) {
    using detail::visit_bn;
    using detail::visit_conv;
    using detail::visit_rb;
    using detail::visit_stage;
    EncoderGrads<T>* ge = grads ? &grads->enc : nullptr;
    DecoderGrads<T>* gd = grads ? &grads->dec : nullptr;
    EntropyModelGrads<T>* gp = grads ? &grads->prior : nullptr;
    visit_stage(m.enc.s1, ge ? &ge->s1 : nullptr, "enc.s1", f);
    visit_stage(m.enc.s2, ge ? &ge->s2 : nullptr, "enc.s2", f);
    visit_conv(m.enc.s3, ge ? &ge->s3 : nullptr, "enc.s3", f);
    visit_rb(m.dec.rb1, gd ? &gd->rb1 : nullptr, "dec.rb1", f);
    visit_rb(m.dec.rb2, gd ? &gd->rb2 : nullptr, "dec.rb2", f);
    visit_stage(m.dec.s1, gd ? &gd->s1 : nullptr, "dec.s1", f);
    visit_stage(m.dec.s2, gd ? &gd->s2 : nullptr, "dec.s2", f);
    visit_conv(m.dec.s3, gd ? &gd->s3 : nullptr, "dec.s3", f);
    f("prior.w1", ParamKind::Trainable, m.prior.w1, gp ? &gp->w1 : nullptr);
    f("prior.b1", ParamKind::Trainable, m.prior.b1, gp ? &gp->b1 : nullptr);
    f("prior.a1", ParamKind::Trainable, m.prior.a1, gp ? &gp->a1 : nullptr);
    f("prior.w2", ParamKind::Trainable, m.prior.w2, gp ? &gp->w2 : nullptr);
    f("prior.b2", ParamKind::Trainable, m.prior.b2, gp ? &gp->b2 : nullptr);
    f("prior.a2", ParamKind::Trainable, m.prior.a2, gp ? &gp->a2 : nullptr);
    f("prior.w3", ParamKind::Trainable, m.prior.w3, gp ? &gp->w3 : nullptr);
    f("prior.b3", ParamKind::Trainable, m.prior.b3, gp ? &gp->b3 : nullptr);
}

template <typename From, typename To>
Model<To> cast_model(const Model<From>& src) {
    Model<To> dst = init_model<To>(src.cfg, src.lambda_id, 0);
    dst.lambda = static_cast<To>(src.lambda);
    dst.sigma_norm = static_cast<To>(src.sigma_norm);
    dst.tables = src.tables;
    dst.prior.k_min = src.prior.k_min;
    dst.prior.k_max = src.prior.k_max;
    std::vector<std::pair<std::string, const Tensor<From>*>> src_params;
    visit_model(const_cast<Model<From>&>(src), static_cast<ModelGrads<From>*>(nullptr),
                [&](const std::string& name, ParamKind, Tensor<From>& t, Tensor<From>*) {
                    src_params.emplace_back(name, &t);
                });
    size_t i = 0;
    visit_model(dst, static_cast<ModelGrads<To>*>(nullptr),
                [&](const std::string& name, ParamKind, Tensor<To>& t, Tensor<To>*) {
                    if (name != src_params[i].first) {
                        throw std::logic_error("model cast: parameter order mismatch");
                    }
                    t = src_params[i].second->template cast<To>();
                    ++i;
                });
    // batch-norm update counters travel outside the visitor
    auto copy_bn = [](const auto& from, auto& to) { to.bn.updates = from.bn.updates; };
    copy_bn(src.enc.s1, dst.enc.s1);
    copy_bn(src.enc.s2, dst.enc.s2);
    copy_bn(src.dec.s1, dst.dec.s1);
    copy_bn(src.dec.s2, dst.dec.s2);
    dst.dec.rb1.bn1.updates = src.dec.rb1.bn1.updates;
    dst.dec.rb1.bn2.updates = src.dec.rb1.bn2.updates;
    dst.dec.rb2.bn1.updates = src.dec.rb2.bn1.updates;
    dst.dec.rb2.bn2.updates = src.dec.rb2.bn2.updates;
    return dst;
}

// ---------------------------------------------------------------------------
// Spec-level codec ops on channel matrices (inference mode)

template <typename T>
Tensor<T> feature_encode(const ChannelMatrix& h, const Model<T>& m) {
    check_dims_multiple_of_16(h.n_c, h.n_t);
    Tensor<T> x = channel_to_tensor<T>(h, T(1) / m.sigma_norm);
    return encoder_forward_infer(x, m.enc);
}

template <typename T>
ChannelMatrix feature_decode(const Tensor<T>& latent, const Model<T>& m) {
    Tensor<T> y = decoder_forward_infer(latent, m.dec);
    if (y.rank() == 4) {
        if (y.dim(0) != 1) throw ShapeError("feature_decode: expected a single latent");
        Tensor<T> squeezed({y.dim(1), y.dim(2), y.dim(3)}, y.values());
        return tensor_to_channel(squeezed, m.sigma_norm);
    }
    return tensor_to_channel(y, m.sigma_norm);
}

// ---------------------------------------------------------------------------
// Rate estimate: -(1/(N_c N_t)) sum log2 p(element) under the continuous
// model; valid for noisy latents during training and integer latents at
// evaluation time.

template <typename T>
double rate_estimate(const Tensor<T>& latent, const Model<T>& m) {
    const Chw s = as_nchw(latent, "rate_estimate");
    if (s.c != m.cfg.latent_channels) {
        throw ShapeError("rate_estimate: latent has wrong channel count");
    }
    PreparedPrior<T> pp(m.prior);
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const double dims = static_cast<double>(CodecConfig::kTotalDownsampling) * s.h *
                        CodecConfig::kTotalDownsampling * s.w;  // N_c * N_t
    double bits = 0;
    const T* d = latent.data();
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const size_t off = (static_cast<size_t>(n) * s.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const double p = static_cast<double>(bin_probability_raw(pp, c, d[off + i]));
                bits -= std::log2(p);
            }
        }
    }
    return bits / (dims * s.n);
}

// ---------------------------------------------------------------------------
// Joint rate-distortion loss (training mode), with full backward.

template <typename T>
struct LossParts {
    T rate_term = 0;  // bits per channel dimension
    T mse_term = 0;   // Eq.(10) convention on normalized planes
    T total = 0;
};

// x_norm: (N,2,H,W) batch already divided by sigma_norm. When grads is
// non-null the model's parameter gradients are filled; noise is drawn from
// rng one draw per latent element.
template <typename T>
LossParts<T> loss_forward_backward(Model<T>& m, const Tensor<T>& x_norm, T lambda,
                                   std::mt19937_64& rng, ModelGrads<T>* grads) {
    if (lambda <= T(0)) throw std::invalid_argument("loss: lambda must be positive");
    const Chw xs = as_nchw(x_norm, "loss");
    if (xs.c != 2) throw ShapeError("loss: input must have 2 planes");
    const double dims = static_cast<double>(xs.h) * xs.w;  // N_c * N_t
    const double batch = static_cast<double>(xs.n);

    EncoderCache<T> ecache;
    Tensor<T> latent = encoder_forward_train(x_norm, m.enc, ecache);
    Tensor<T> noisy = add_uniform_noise(latent, rng);

    // rate term and its gradients
    PreparedPrior<T> pp(m.prior);
    const Chw ls = as_nchw(noisy, "loss latent");
    const size_t plane = static_cast<size_t>(ls.h) * ls.w;
    Tensor<T> g_noisy = make_like(noisy, ls);
    double rate_bits = 0;
    const double inv_ln2 = 1.4426950408889634074;
    const T* nd = noisy.data();
    T* gn = g_noisy.data();
    EntropyModelGrads<T>* gp = grads ? &grads->prior : nullptr;
    for (int n = 0; n < ls.n; ++n) {
        for (int c = 0; c < ls.c; ++c) {
            const size_t off = (static_cast<size_t>(n) * ls.c + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const T x = nd[off + i];
                CdfTrace<T> hi_tr, lo_tr;
                const T hi = cdf_forward(pp, c, x + static_cast<T>(0.5), &hi_tr);
                const T lo = cdf_forward(pp, c, x - static_cast<T>(0.5), &lo_tr);
                const double p = static_cast<double>(hi - lo) + kProbFloor;
                rate_bits -= std::log2(p);
                const T dp = static_cast<T>(-inv_ln2 / (p * dims * batch));
                const T dx_hi = cdf_backward(pp, c, hi_tr, dp, gp);
                const T dx_lo = cdf_backward(pp, c, lo_tr, -dp, gp);
                gn[off + i] = dx_hi + dx_lo;
            }
        }
    }

    DecoderCache<T> dcache;
    Tensor<T> recon = decoder_forward_train(noisy, m.dec, dcache);
    if (!recon.same_shape(x_norm)) {
        throw ShapeError("loss: reconstruction shape " + recon.shape_str() +
                         " does not match input " + x_norm.shape_str());
    }

    double sq = 0;
    for (size_t i = 0; i < recon.numel(); ++i) {
        const double d = static_cast<double>(recon[i]) - static_cast<double>(x_norm[i]);
        sq += d * d;
    }
    LossParts<T> parts;
    parts.rate_term = static_cast<T>(rate_bits / (dims * batch));
    parts.mse_term = static_cast<T>(sq / (dims * batch));
    parts.total = parts.rate_term + lambda * parts.mse_term;

    if (grads != nullptr) {
        Tensor<T> g_recon = make_like(recon, xs);
        const T mse_scale = static_cast<T>(2.0 / (dims * batch)) * lambda;
        for (size_t i = 0; i < recon.numel(); ++i) {
            g_recon[i] = mse_scale * (recon[i] - x_norm[i]);
        }
        Tensor<T> g_latent = decoder_backward(m.dec, dcache, g_recon, grads->dec);
        for (size_t i = 0; i < g_latent.numel(); ++i) g_latent[i] += g_noisy[i];
        encoder_backward(m.enc, ecache, g_latent, grads->enc, false);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Training

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 16;
    float lr = 1e-4f;
    CodecConfig arch;
    bool verbose = false;
};

struct EpochStats {
    double rate = 0;
    double mse = 0;
    double total = 0;
};

struct TrainResult {
    Model<float> model;
    std::vector<EpochStats> history;
};

TrainResult train(const Dataset& data, int lambda_id, const TrainConfig& cfg, uint64_t seed);

// Derives coding support from a trained model over a dataset and finalizes
// the frequency tables (bounds expanded by +-2).
void finalize_model_tables(Model<float>& m, const Dataset& data);

// ---------------------------------------------------------------------------
// Compression / decompression

struct CompressResult {
    std::vector<uint8_t> frame;        // framed bitstream bytes
    size_t payload_bytes = 0;
    double bit_rate = 0;               // (16-bit lambda id + payload bits) / (n_c n_t)
    double bit_rate_payload_only = 0;  // payload bits / (n_c n_t)
    std::vector<int32_t> symbols;      // quantized latent, row-major
};

CompressResult compress(const Model<float>& m, const ChannelMatrix& h);

struct DecompressResult {
    ChannelMatrix reconstruction;
    std::vector<int32_t> symbols;
    uint16_t lambda_id = 0;
};

DecompressResult decompress(const Model<float>& m, const uint8_t* frame, size_t size);

// Debug path: plain autoencoder output, optionally with the quantizer in the
// latent path and no entropy coding. With quantize_latent the result equals
// decompress(compress(h)) exactly; without it the codec's only lossy step is
// removed.
ChannelMatrix reconstruct_direct(const Model<float>& m, const ChannelMatrix& h,
                                 bool quantize_latent);

// ---------------------------------------------------------------------------
// Padding (zero rows/columns appended to reach multiples of 16)

struct PaddingRecord {
    int orig_n_c = 0;
    int orig_n_t = 0;
    bool padded() const { return orig_n_c > 0; }
};

std::pair<ChannelMatrix, PaddingRecord> pad_to_16(const ChannelMatrix& h);
ChannelMatrix crop_padding(const ChannelMatrix& h, const PaddingRecord& rec);

// ---------------------------------------------------------------------------
// Metrics (Eqs. 11-12)

inline constexpr double kNmseNegInf = -std::numeric_limits<double>::infinity();

double nmse_ratio(const ChannelMatrix& h, const ChannelMatrix& h_hat);
// 10 log10 of the ratio; identical matrices report -inf
double nmse_db(const ChannelMatrix& h, const ChannelMatrix& h_hat);
double nmse_db_mean(const std::vector<double>& ratios);
// mean per-subcarrier |h_hat^H h| / (|h_hat||h|); zero-norm rows are skipped
// unless strict, which throws
double cosine_corr(const ChannelMatrix& h, const ChannelMatrix& h_hat, bool strict = false);

// ---------------------------------------------------------------------------
// Checkpoint container: magic "CMCK" | version u16 | arch | lambda_id u16 |
// lambda f32 | sigma_norm f32 | bn_ready u8 | named f32 parameter records |
// finalized frequency tables.

void save_checkpoint(const Model<float>& m, const std::string& path);
Model<float> load_checkpoint(const std::string& path);
std::vector<uint8_t> serialize_checkpoint(const Model<float>& m);
Model<float> deserialize_checkpoint(const uint8_t* data, size_t size);

// ---------------------------------------------------------------------------
// Rate-distortion sweep

struct RdPoint {
    double lambda = 0;
    double bit_rate = 0;  // header-inclusive, bits per channel dimension
    double entropy = 0;   // model cross-entropy of the quantized latents
    double nmse_db = 0;
    double rho = 0;
};

std::vector<RdPoint> rd_sweep(const std::vector<const Model<float>*>& models,
                              const Dataset& test);
std::string rd_csv(const std::vector<RdPoint>& points);

}  // namespace deepcmc

#pragma once

#include <random>
#include <string>
#include <vector>

#include "deepcmc/channel.hpp"
#include "deepcmc/nn.hpp"
#include "deepcmc/tensor.hpp"

namespace deepcmc {

// Fixed stage geometry: encoder conv kernels 9,5,5 with pooling 4,2,2
// (total downsampling 16); decoder mirrors with upsampling 2,2,4 and
// kernels 5,5,9. Channel widths are configurable and serialized with the
// checkpoint.
struct CodecConfig {
    int hidden_channels = 256;
    int latent_channels = 256;

    static constexpr int kStages = 3;
    static constexpr int kEncKernel[kStages] = {9, 5, 5};
    static constexpr int kPool[kStages] = {4, 2, 2};
    static constexpr int kResidualKernel = 5;
    static constexpr int kResidualBlocks = 2;
    static constexpr int kTotalDownsampling = 16;
    static constexpr float kBnMomentum = 0.9f;
    static constexpr float kBnEps = 1e-5f;

    bool operator==(const CodecConfig& o) const {
        return hidden_channels == o.hidden_channels && latent_channels == o.latent_channels;
    }
};

template <typename T>
struct ConvStage {
    nn::Conv2d<T> conv;
    nn::BatchNorm<T> bn;
    nn::Prelu<T> act;
};

// Encoder: (conv9 bn prelu pool4) (conv5 bn prelu pool2) (conv5 pool2).
// No normalization or activation after the final conv, so latents are
// unbounded reals ready for quantization.
template <typename T>
struct FeatureEncoder {
    ConvStage<T> s1;
    ConvStage<T> s2;
    nn::Conv2d<T> s3;
};

// F(x) = conv bn prelu conv bn; block output is x + F(x).
template <typename T>
struct ResidualBlock {
    nn::Conv2d<T> conv1;
    nn::BatchNorm<T> bn1;
    nn::Prelu<T> act;
    nn::Conv2d<T> conv2;
    nn::BatchNorm<T> bn2;
};

// Decoder: two residual blocks with an extra identity shortcut spanning
// both, then (up2 conv5 bn prelu) (up2 conv5 bn prelu) (up4 conv9 -> 2ch).
template <typename T>
struct FeatureDecoder {
    ResidualBlock<T> rb1;
    ResidualBlock<T> rb2;
    ConvStage<T> s1;
    ConvStage<T> s2;
    nn::Conv2d<T> s3;
};

template <typename T>
void init_conv_stage(ConvStage<T>& s, int in_ch, int out_ch, int k, std::mt19937_64& rng) {
    nn::init_conv(s.conv, out_ch, in_ch, k, rng);
    nn::init_batch_norm(s.bn, out_ch);
    nn::init_prelu(s.act, out_ch);
}

template <typename T>
void init_residual_block(ResidualBlock<T>& rb, int ch, int k, std::mt19937_64& rng) {
    nn::init_conv(rb.conv1, ch, ch, k, rng);
    nn::init_batch_norm(rb.bn1, ch);
    nn::init_prelu(rb.act, ch);
    nn::init_conv(rb.conv2, ch, ch, k, rng);
    nn::init_batch_norm(rb.bn2, ch);
}

template <typename T>
FeatureEncoder<T> init_encoder(const CodecConfig& cfg, std::mt19937_64& rng) {
    FeatureEncoder<T> e;
    init_conv_stage(e.s1, 2, cfg.hidden_channels, CodecConfig::kEncKernel[0], rng);
    init_conv_stage(e.s2, cfg.hidden_channels, cfg.hidden_channels, CodecConfig::kEncKernel[1], rng);
    nn::init_conv(e.s3, cfg.latent_channels, cfg.hidden_channels, CodecConfig::kEncKernel[2], rng);
    return e;
}

template <typename T>
FeatureDecoder<T> init_decoder(const CodecConfig& cfg, std::mt19937_64& rng) {
    FeatureDecoder<T> d;
    init_residual_block(d.rb1, cfg.latent_channels, CodecConfig::kResidualKernel, rng);
    init_residual_block(d.rb2, cfg.latent_channels, CodecConfig::kResidualKernel, rng);
    init_conv_stage(d.s1, cfg.latent_channels, cfg.hidden_channels, CodecConfig::kEncKernel[1], rng);
    init_conv_stage(d.s2, cfg.hidden_channels, cfg.hidden_channels, CodecConfig::kEncKernel[1], rng);
    nn::init_conv(d.s3, 2, cfg.hidden_channels, CodecConfig::kEncKernel[0], rng);
    return d;
}

// ---------------------------------------------------------------------------
// ChannelMatrix <-> 2-plane real tensor

template <typename T>
Tensor<T> channel_to_tensor(const ChannelMatrix& h, T scale) {
    Tensor<T> x({2, h.n_c, h.n_t});
    const size_t plane = static_cast<size_t>(h.n_c) * h.n_t;
    for (size_t i = 0; i < plane; ++i) {
        x[i] = static_cast<T>(h.entries[i].real()) * scale;
        x[plane + i] = static_cast<T>(h.entries[i].imag()) * scale;
    }
    return x;
}

template <typename T>
ChannelMatrix tensor_to_channel(const Tensor<T>& x, T scale) {
    const Chw s = as_nchw(x, "tensor_to_channel");
    if (s.n != 1 || s.c != 2) {
        throw ShapeError("tensor_to_channel: expected a single 2-plane tensor, got " +
                         x.shape_str());
    }
    ChannelMatrix h(s.h, s.w);
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    const T* d = x.data();
    for (size_t i = 0; i < plane; ++i) {
        h.entries[i] = std::complex<float>(static_cast<float>(d[i] * scale),
                                           static_cast<float>(d[plane + i] * scale));
    }
    return h;
}

inline void check_dims_multiple_of_16(int n_c, int n_t) {
    if (n_c % CodecConfig::kTotalDownsampling != 0 || n_t % CodecConfig::kTotalDownsampling != 0) {
        const int pad_c = (CodecConfig::kTotalDownsampling - n_c % CodecConfig::kTotalDownsampling) %
                          CodecConfig::kTotalDownsampling;
        const int pad_t = (CodecConfig::kTotalDownsampling - n_t % CodecConfig::kTotalDownsampling) %
                          CodecConfig::kTotalDownsampling;
        throw ShapeError("channel dims " + std::to_string(n_c) + "x" + std::to_string(n_t) +
                         " must be multiples of 16; pad with " + std::to_string(pad_c) +
                         " subcarrier rows and " + std::to_string(pad_t) + " antenna columns");
    }
}

// ---------------------------------------------------------------------------
// Encoder forward

template <typename T>
struct ConvStageCache {
    Tensor<T> conv_in;   // stage input
    Tensor<T> conv_out;  // pre-bn
    nn::BnCache<T> bn;
    Tensor<T> act_in;    // post-bn, pre-prelu
};

template <typename T>
struct EncoderCache {
    ConvStageCache<T> s1, s2;
    Tensor<T> s3_in;
};

template <typename T>
Tensor<T> conv_stage_train(const Tensor<T>& x, ConvStage<T>& s, ConvStageCache<T>& c) {
    c.conv_in = x;
    c.conv_out = nn::conv2d(x, s.conv);
    Tensor<T> b = nn::batch_norm_train(c.conv_out, s.bn, static_cast<T>(CodecConfig::kBnMomentum),
                                       static_cast<T>(CodecConfig::kBnEps), c.bn);
    c.act_in = b;
    return nn::prelu(b, s.act);
}

template <typename T>
Tensor<T> conv_stage_infer(const Tensor<T>& x, const ConvStage<T>& s) {
    Tensor<T> a = nn::conv2d(x, s.conv);
    Tensor<T> b = nn::batch_norm_infer(a, s.bn, static_cast<T>(CodecConfig::kBnEps));
    return nn::prelu(b, s.act);
}

template <typename T>
struct ConvStageGrads {
    nn::Conv2dGrads<T> conv;
    nn::BatchNormGrads<T> bn;
    Tensor<T> slope;
};

// returns grad w.r.t. the stage input
template <typename T>
Tensor<T> conv_stage_backward(const ConvStage<T>& s, const ConvStageCache<T>& c,
                              const Tensor<T>& gy, ConvStageGrads<T>& g) {
    Tensor<T> g_act_in;
    nn::prelu_backward(c.act_in, s.act, gy, g_act_in, g.slope);
    Tensor<T> g_conv_out;
    nn::batch_norm_backward(c.bn, s.bn, g_act_in, g_conv_out, g.bn);
    Tensor<T> gx;
    g.conv = nn::conv2d_backward(c.conv_in, s.conv, g_conv_out, &gx);
    return gx;
}

// Latent features from a normalized 2-plane input; dims must be multiples
// of 16. Output shape (N,) latent_channels x H/16 x W/16.
template <typename T>
Tensor<T> encoder_forward_train(const Tensor<T>& x, FeatureEncoder<T>& enc, EncoderCache<T>& c) {
    const Chw s = as_nchw(x, "feature_encode");
    check_dims_multiple_of_16(s.h, s.w);
    Tensor<T> h1 = nn::avg_pool(conv_stage_train(x, enc.s1, c.s1), CodecConfig::kPool[0]);
    Tensor<T> h2 = nn::avg_pool(conv_stage_train(h1, enc.s2, c.s2), CodecConfig::kPool[1]);
    c.s3_in = h2;
    return nn::avg_pool(nn::conv2d(h2, enc.s3), CodecConfig::kPool[2]);
}

template <typename T>
Tensor<T> encoder_forward_infer(const Tensor<T>& x, const FeatureEncoder<T>& enc) {
    const Chw s = as_nchw(x, "feature_encode");
    check_dims_multiple_of_16(s.h, s.w);
    Tensor<T> h1 = nn::avg_pool(conv_stage_infer(x, enc.s1), CodecConfig::kPool[0]);
    Tensor<T> h2 = nn::avg_pool(conv_stage_infer(h1, enc.s2), CodecConfig::kPool[1]);
    return nn::avg_pool(nn::conv2d(h2, enc.s3), CodecConfig::kPool[2]);
}

template <typename T>
struct EncoderGrads {
    ConvStageGrads<T> s1, s2;
    nn::Conv2dGrads<T> s3;
};

template <typename T>
Tensor<T> encoder_backward(const FeatureEncoder<T>& enc, const EncoderCache<T>& c,
                           const Tensor<T>& g_latent, EncoderGrads<T>& g, bool need_input_grad) {
    Tensor<T> g3 = nn::avg_pool_backward(g_latent, CodecConfig::kPool[2]);
    Tensor<T> g_s3_in;
    g.s3 = nn::conv2d_backward(c.s3_in, enc.s3, g3, &g_s3_in);
    Tensor<T> g2 = nn::avg_pool_backward(g_s3_in, CodecConfig::kPool[1]);
    Tensor<T> g_s2_in = conv_stage_backward(enc.s2, c.s2, g2, g.s2);
    Tensor<T> g1 = nn::avg_pool_backward(g_s2_in, CodecConfig::kPool[0]);
    Tensor<T> g_in = conv_stage_backward(enc.s1, c.s1, g1, g.s1);
    if (!need_input_grad) return Tensor<T>();
    return g_in;
}

// ---------------------------------------------------------------------------
// Residual blocks and decoder

template <typename T>
struct ResidualCache {
    Tensor<T> x;
    Tensor<T> conv1_out;
    nn::BnCache<T> bn1;
    Tensor<T> act_in;
    Tensor<T> act_out;
    Tensor<T> conv2_out;
    nn::BnCache<T> bn2;
};

template <typename T>
struct ResidualGrads {
    nn::Conv2dGrads<T> conv1, conv2;
    nn::BatchNormGrads<T> bn1, bn2;
    Tensor<T> slope;
};

template <typename T>
void check_residual_channels(const Tensor<T>& x, const ResidualBlock<T>& rb) {
    const Chw s = as_nchw(x, "residual_block");
    if (rb.conv1.in_channels() != s.c || rb.conv2.out_channels() != s.c) {
        throw ShapeError("residual_block: input/output channel counts must match, got input " +
                         x.shape_str() + " vs block " + std::to_string(rb.conv1.in_channels()) +
                         "->" + std::to_string(rb.conv2.out_channels()));
    }
}

template <typename T>
Tensor<T> residual_forward_train(const Tensor<T>& x, ResidualBlock<T>& rb, ResidualCache<T>& c) {
    check_residual_channels(x, rb);
    c.x = x;
    c.conv1_out = nn::conv2d(x, rb.conv1);
    Tensor<T> b1 = nn::batch_norm_train(c.conv1_out, rb.bn1, static_cast<T>(CodecConfig::kBnMomentum),
                                        static_cast<T>(CodecConfig::kBnEps), c.bn1);
    c.act_in = b1;
    c.act_out = nn::prelu(b1, rb.act);
    c.conv2_out = nn::conv2d(c.act_out, rb.conv2);
    Tensor<T> f = nn::batch_norm_train(c.conv2_out, rb.bn2, static_cast<T>(CodecConfig::kBnMomentum),
                                       static_cast<T>(CodecConfig::kBnEps), c.bn2);
    for (size_t i = 0; i < f.numel(); ++i) f[i] += x[i];
    return f;
}

template <typename T>
Tensor<T> residual_forward_infer(const Tensor<T>& x, const ResidualBlock<T>& rb) {
    check_residual_channels(x, rb);
    Tensor<T> a = nn::conv2d(x, rb.conv1);
    Tensor<T> b = nn::batch_norm_infer(a, rb.bn1, static_cast<T>(CodecConfig::kBnEps));
    Tensor<T> p = nn::prelu(b, rb.act);
    Tensor<T> q = nn::conv2d(p, rb.conv2);
    Tensor<T> f = nn::batch_norm_infer(q, rb.bn2, static_cast<T>(CodecConfig::kBnEps));
    for (size_t i = 0; i < f.numel(); ++i) f[i] += x[i];
    return f;
}

template <typename T>
Tensor<T> residual_backward(const ResidualBlock<T>& rb, const ResidualCache<T>& c,
                            const Tensor<T>& gy, ResidualGrads<T>& g) {
    Tensor<T> g_conv2_out;
    nn::batch_norm_backward(c.bn2, rb.bn2, gy, g_conv2_out, g.bn2);
    Tensor<T> g_act_out;
    g.conv2 = nn::conv2d_backward(c.act_out, rb.conv2, g_conv2_out, &g_act_out);
    Tensor<T> g_act_in;
    nn::prelu_backward(c.act_in, rb.act, g_act_out, g_act_in, g.slope);
    Tensor<T> g_conv1_out;
    nn::batch_norm_backward(c.bn1, rb.bn1, g_act_in, g_conv1_out, g.bn1);
    Tensor<T> gx;
    g.conv1 = nn::conv2d_backward(c.x, rb.conv1, g_conv1_out, &gx);
    for (size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];  // shortcut
    return gx;
}

template <typename T>
struct DecoderCache {
    ResidualCache<T> rb1, rb2;
    ConvStageCache<T> s1, s2;
    Tensor<T> s3_in;
};

template <typename T>
struct DecoderGrads {
    ResidualGrads<T> rb1, rb2;
    ConvStageGrads<T> s1, s2;
    nn::Conv2dGrads<T> s3;
};

template <typename T>
inline void check_decoder_input(const Tensor<T>& m, const FeatureDecoder<T>& dec) {
    const Chw s = as_nchw(m, "feature_decode");
    if (s.c != dec.rb1.conv1.in_channels()) {
        throw ShapeError("feature_decode: expected " +
                         std::to_string(dec.rb1.conv1.in_channels()) + " feature channels, got " +
                         std::to_string(s.c));
    }
}

template <typename T>
Tensor<T> decoder_forward_train(const Tensor<T>& m, FeatureDecoder<T>& dec, DecoderCache<T>& c) {
    check_decoder_input(m, dec);
    Tensor<T> r1 = residual_forward_train(m, dec.rb1, c.rb1);
    Tensor<T> r2 = residual_forward_train(r1, dec.rb2, c.rb2);
    for (size_t i = 0; i < r2.numel(); ++i) r2[i] += m[i];  // shortcut spanning both blocks
    Tensor<T> u1 = nn::upsample_nearest(r2, CodecConfig::kPool[2]);
    Tensor<T> h1 = conv_stage_train(u1, dec.s1, c.s1);
    Tensor<T> u2 = nn::upsample_nearest(h1, CodecConfig::kPool[1]);
    Tensor<T> h2 = conv_stage_train(u2, dec.s2, c.s2);
    Tensor<T> u3 = nn::upsample_nearest(h2, CodecConfig::kPool[0]);
    c.s3_in = u3;
    return nn::conv2d(u3, dec.s3);
}

template <typename T>
Tensor<T> decoder_forward_infer(const Tensor<T>& m, const FeatureDecoder<T>& dec) {
    check_decoder_input(m, dec);
    Tensor<T> r1 = residual_forward_infer(m, dec.rb1);
    Tensor<T> r2 = residual_forward_infer(r1, dec.rb2);
    for (size_t i = 0; i < r2.numel(); ++i) r2[i] += m[i];
    Tensor<T> u1 = nn::upsample_nearest(r2, CodecConfig::kPool[2]);
    Tensor<T> h1 = conv_stage_infer(u1, dec.s1);
    Tensor<T> u2 = nn::upsample_nearest(h1, CodecConfig::kPool[1]);
    Tensor<T> h2 = conv_stage_infer(u2, dec.s2);
    Tensor<T> u3 = nn::upsample_nearest(h2, CodecConfig::kPool[0]);
    return nn::conv2d(u3, dec.s3);
}

// returns grad w.r.t. the latent input
template <typename T>
Tensor<T> decoder_backward(const FeatureDecoder<T>& dec, const DecoderCache<T>& c,
                           const Tensor<T>& g_out, DecoderGrads<T>& g) {
    Tensor<T> g_u3;
    g.s3 = nn::conv2d_backward(c.s3_in, dec.s3, g_out, &g_u3);
    Tensor<T> g_h2 = nn::upsample_nearest_backward(g_u3, CodecConfig::kPool[0]);
    Tensor<T> g_u2 = conv_stage_backward(dec.s2, c.s2, g_h2, g.s2);
    Tensor<T> g_h1 = nn::upsample_nearest_backward(g_u2, CodecConfig::kPool[1]);
    Tensor<T> g_u1 = conv_stage_backward(dec.s1, c.s1, g_h1, g.s1);
    Tensor<T> g_r2 = nn::upsample_nearest_backward(g_u1, CodecConfig::kPool[2]);
    Tensor<T> g_r1 = residual_backward(dec.rb2, c.rb2, g_r2, g.rb2);
    Tensor<T> g_m = residual_backward(dec.rb1, c.rb1, g_r1, g.rb1);
    for (size_t i = 0; i < g_m.numel(); ++i) g_m[i] += g_r2[i];  // spanning shortcut
    return g_m;
}

}  // namespace deepcmc

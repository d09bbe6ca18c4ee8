#include "deepcmc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace deepcmc {

namespace {

// Global scale: standard deviation of all real entries over the training set.
float dataset_sigma(const Dataset& data) {
    double sum = 0, sq = 0;
    size_t n = 0;
    for (const auto& s : data.samples) {
        for (const auto& v : s.entries) {
            sum += v.real();
            sum += v.imag();
            sq += static_cast<double>(v.real()) * v.real();
            sq += static_cast<double>(v.imag()) * v.imag();
            n += 2;
        }
    }
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(1e-30, sq / static_cast<double>(n) - mean * mean);
    return static_cast<float>(std::sqrt(var));
}

Tensor<float> assemble_batch(const Dataset& data, const std::vector<size_t>& order, size_t begin,
                             size_t count, float inv_sigma) {
    const int nc = data.n_c, nt = data.n_t;
    Tensor<float> x({static_cast<int>(count), 2, nc, nt});
    const size_t plane = static_cast<size_t>(nc) * nt;
    for (size_t b = 0; b < count; ++b) {
        const ChannelMatrix& s = data.samples[order[begin + b]];
        float* dst = x.data() + b * 2 * plane;
        for (size_t i = 0; i < plane; ++i) {
            dst[i] = s.entries[i].real() * inv_sigma;
            dst[plane + i] = s.entries[i].imag() * inv_sigma;
        }
    }
    return x;
}

std::vector<int32_t> latent_to_symbols(const Tensor<float>& q) {
    std::vector<int32_t> out(q.numel());
    for (size_t i = 0; i < q.numel(); ++i) out[i] = static_cast<int32_t>(std::lrint(q[i]));
    return out;
}

}  // namespace

TrainResult train(const Dataset& data, int lambda_id, const TrainConfig& cfg, uint64_t seed) {
    if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");
    check_dims_multiple_of_16(data.n_c, data.n_t);
    if (cfg.batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");

    TrainResult result;
    result.model = init_model<float>(cfg.arch, lambda_id, seed);
    Model<float>& m = result.model;
    m.sigma_norm = dataset_sigma(data);
    const float inv_sigma = 1.0f / m.sigma_norm;
    const float lambda = m.lambda;

    std::mt19937_64 shuffle_rng(Rng::derive(seed, 0x5u));
    std::mt19937_64 noise_rng(Rng::derive(seed, 0x11u));

    std::vector<std::pair<Tensor<float>*, Tensor<float>*>> pairs;  // (param, grad), per step
    std::vector<nn::AdamState<float>> adam;
    nn::AdamConfig<float> adam_cfg;
    adam_cfg.lr = cfg.lr;

    std::vector<size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), size_t{0});

    const size_t n = data.samples.size();
    const size_t bs = static_cast<size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with our deterministic engine
        for (size_t i = n - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng() % (i + 1));
            std::swap(order[i], order[j]);
        }
        EpochStats stats;
        size_t batches = 0;
        for (size_t at = 0; at < n; at += bs) {
            const size_t count = std::min(bs, n - at);
            if (count < 2) break;  // batch norm needs at least 2 rows
            Tensor<float> x = assemble_batch(data, order, at, count, inv_sigma);
            ModelGrads<float> grads(m);
            LossParts<float> parts = loss_forward_backward(m, x, lambda, noise_rng, &grads);
            if (!std::isfinite(static_cast<double>(parts.total))) {
                throw TrainingDiverged("loss diverged at epoch " + std::to_string(epoch) +
                                       " batch " + std::to_string(batches) + ": rate=" +
                                       std::to_string(parts.rate_term) + " mse=" +
                                       std::to_string(parts.mse_term));
            }
            pairs.clear();
            visit_model(m, &grads,
                        [&](const std::string&, ParamKind kind, Tensor<float>& p,
                            Tensor<float>* g) {
                            if (kind == ParamKind::Trainable) pairs.emplace_back(&p, g);
                        });
            if (adam.empty()) {
                adam.reserve(pairs.size());
                for (auto& pr : pairs) adam.emplace_back(pr.first->shape());
            }
            for (size_t i = 0; i < pairs.size(); ++i) {
                adam_step(adam[i], adam_cfg, *pairs[i].first, *pairs[i].second);
            }
            stats.rate += parts.rate_term;
            stats.mse += parts.mse_term;
            stats.total += parts.total;
            ++batches;
        }
        if (batches > 0) {
            stats.rate /= static_cast<double>(batches);
            stats.mse /= static_cast<double>(batches);
            stats.total /= static_cast<double>(batches);
        }
        result.history.push_back(stats);
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %3d  rate %.4f  mse %.6f  total %.4f\n", epoch + 1,
                         stats.rate, stats.mse, stats.total);
        }
    }

    finalize_model_tables(m, data);
    return result;
}

void finalize_model_tables(Model<float>& m, const Dataset& data) {
    long k_min = 0, k_max = 0;
    bool any = false;
    for (const auto& s : data.samples) {
        Tensor<float> latent = feature_encode(s, m);
        for (size_t i = 0; i < latent.numel(); ++i) {
            const long k = std::lrint(latent[i]);
            if (!any) {
                k_min = k_max = k;
                any = true;
            } else {
                k_min = std::min(k_min, k);
                k_max = std::max(k_max, k);
            }
        }
    }
    if (!any) throw std::invalid_argument("finalize_model_tables: empty dataset");
    m.prior.k_min = static_cast<int>(k_min) - 2;
    m.prior.k_max = static_cast<int>(k_max) + 2;
    m.tables = finalize_tables(m.prior, m.prior.k_min, m.prior.k_max);
}

CompressResult compress(const Model<float>& m, const ChannelMatrix& h) {
    if (!m.tables.finalized()) {
        throw std::runtime_error("compress: checkpoint has no finalized entropy tables");
    }
    check_dims_multiple_of_16(h.n_c, h.n_t);
    Tensor<float> latent = feature_encode(h, m);
    Tensor<float> q = quantize(latent);
    CompressResult r;
    r.symbols = latent_to_symbols(q);
    const size_t plane = static_cast<size_t>(latent.dim(1)) * latent.dim(2);

    BitstreamFrame f;
    f.lambda_id = static_cast<uint16_t>(m.lambda_id);
    f.n_c = static_cast<uint16_t>(h.n_c);
    f.n_t = static_cast<uint16_t>(h.n_t);
    f.payload = entropy_encode(r.symbols, m.tables, plane);
    f.checksum = symbol_stream_checksum(r.symbols);
    r.frame = write_frame(f);
    r.payload_bytes = f.payload.size();
    const double dims = static_cast<double>(h.n_c) * h.n_t;
    r.bit_rate = (static_cast<double>(BitstreamFrame::kLambdaBits) +
                  8.0 * static_cast<double>(r.payload_bytes)) /
                 dims;
    r.bit_rate_payload_only = 8.0 * static_cast<double>(r.payload_bytes) / dims;
    return r;
}

DecompressResult decompress(const Model<float>& m, const uint8_t* frame, size_t size) {
    if (!m.tables.finalized()) {
        throw std::runtime_error("decompress: checkpoint has no finalized entropy tables");
    }
    BitstreamFrame f = read_frame(frame, size);
    if (f.lambda_id != static_cast<uint16_t>(m.lambda_id)) {
        throw std::runtime_error("decompress: bitstream lambda id " + std::to_string(f.lambda_id) +
                                 " does not match checkpoint lambda id " +
                                 std::to_string(m.lambda_id));
    }
    check_dims_multiple_of_16(f.n_c, f.n_t);
    const int lh = f.n_c / CodecConfig::kTotalDownsampling;
    const int lw = f.n_t / CodecConfig::kTotalDownsampling;
    const size_t plane = static_cast<size_t>(lh) * lw;
    const size_t count = static_cast<size_t>(m.cfg.latent_channels) * plane;

    DecompressResult r;
    r.lambda_id = f.lambda_id;
    r.symbols = entropy_decode(f.payload.data(), f.payload.size(), m.tables, count, plane);
    if (symbol_stream_checksum(r.symbols) != f.checksum) {
        throw CodecError("decompress: symbol checksum mismatch (wrong model tables or corrupt payload)");
    }
    Tensor<float> latent({m.cfg.latent_channels, lh, lw});
    for (size_t i = 0; i < count; ++i) latent[i] = static_cast<float>(r.symbols[i]);
    r.reconstruction = feature_decode(latent, m);
    return r;
}

ChannelMatrix reconstruct_direct(const Model<float>& m, const ChannelMatrix& h,
                                 bool quantize_latent) {
    Tensor<float> latent = feature_encode(h, m);
    if (quantize_latent) latent = quantize(latent);
    return feature_decode(latent, m);
}

std::pair<ChannelMatrix, PaddingRecord> pad_to_16(const ChannelMatrix& h) {
    const int mult = CodecConfig::kTotalDownsampling;
    const int nc = (h.n_c + mult - 1) / mult * mult;
    const int nt = (h.n_t + mult - 1) / mult * mult;
    if (nc == h.n_c && nt == h.n_t) return {h, PaddingRecord{}};
    ChannelMatrix out(nc, nt);
    for (int n = 0; n < h.n_c; ++n) {
        for (int t = 0; t < h.n_t; ++t) out.at(n, t) = h.at(n, t);
    }
    return {out, PaddingRecord{h.n_c, h.n_t}};
}

ChannelMatrix crop_padding(const ChannelMatrix& h, const PaddingRecord& rec) {
    if (!rec.padded()) return h;
    if (rec.orig_n_c > h.n_c || rec.orig_n_t > h.n_t) {
        throw std::invalid_argument("crop_padding: record larger than matrix");
    }
    ChannelMatrix out(rec.orig_n_c, rec.orig_n_t);
    for (int n = 0; n < rec.orig_n_c; ++n) {
        for (int t = 0; t < rec.orig_n_t; ++t) out.at(n, t) = h.at(n, t);
    }
    return out;
}

std::vector<RdPoint> rd_sweep(const std::vector<const Model<float>*>& models,
                              const Dataset& test) {
    std::vector<RdPoint> points;
    for (const Model<float>* mp : models) {
        const Model<float>& m = *mp;
        if (!models.empty() && !(m.cfg == models.front()->cfg)) {
            throw std::invalid_argument("rd_sweep: checkpoints must share one architecture");
        }
        RdPoint pt;
        pt.lambda = static_cast<double>(m.lambda);
        double ratio_sum = 0, rho_sum = 0, rate_sum = 0, entropy_sum = 0;
        for (const auto& s : test.samples) {
            CompressResult c = compress(m, s);
            DecompressResult d = decompress(m, c.frame.data(), c.frame.size());
            ratio_sum += nmse_ratio(s, d.reconstruction);
            rho_sum += cosine_corr(s, d.reconstruction);
            rate_sum += c.bit_rate;
            Tensor<float> q({m.cfg.latent_channels, s.n_c / CodecConfig::kTotalDownsampling,
                             s.n_t / CodecConfig::kTotalDownsampling});
            for (size_t i = 0; i < q.numel(); ++i) q[i] = static_cast<float>(c.symbols[i]);
            entropy_sum += rate_estimate(q, m);
        }
        const double n = static_cast<double>(test.samples.size());
        pt.bit_rate = rate_sum / n;
        pt.entropy = entropy_sum / n;
        pt.nmse_db = 10.0 * std::log10(ratio_sum / n);
        pt.rho = rho_sum / n;
        points.push_back(pt);
    }
    return points;
}

std::string rd_csv(const std::vector<RdPoint>& points) {
    std::ostringstream os;
    os << "lambda,bit_rate,entropy,nmse_db,rho\n";
    os.precision(6);
    for (const auto& p : points) {
        os << p.lambda << "," << p.bit_rate << "," << p.entropy << "," << p.nmse_db << ","
           << p.rho << "\n";
    }
    return os.str();
}

}  // namespace deepcmc

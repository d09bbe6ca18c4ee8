#include "deepcmc/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "deepcmc/serialize.hpp"

namespace deepcmc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kHalfPi = 1.5707963267948966192313216916398;
}  // namespace

void validate_config(const ChannelGenConfig& cfg) {
    if (cfg.n_c < 1 || cfg.n_t < 1) throw std::invalid_argument("channel dims must be >= 1");
    if (cfg.paths < 1) throw std::invalid_argument("path count L must be >= 1");
    if (cfg.sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
    if (cfg.delay_spread_s < 0) throw std::invalid_argument("delay spread must be >= 0");
    if (cfg.spacing_over_lambda <= 0) throw std::invalid_argument("d/lambda must be positive");
    if (cfg.aod_min_rad > cfg.aod_max_rad || cfg.aod_min_rad <= -kHalfPi ||
        cfg.aod_max_rad >= kHalfPi) {
        throw std::invalid_argument("AoD range must lie inside (-pi/2, pi/2)");
    }
}

std::vector<std::complex<double>> ula_response(double phi, int n_t, double d_over_lambda) {
    if (n_t < 1) throw std::invalid_argument("ula_response: n_t must be >= 1");
    std::vector<std::complex<double>> a(static_cast<size_t>(n_t));
    const double step = -kTwoPi * d_over_lambda * std::sin(phi);
    for (int k = 0; k < n_t; ++k) {
        a[static_cast<size_t>(k)] = std::polar(1.0, step * k);
    }
    return a;
}

ChannelMatrix channel_from_paths(const ChannelGenConfig& cfg,
                                 const std::vector<PathRealization>& paths) {
    validate_config(cfg);
    if (paths.empty()) throw std::invalid_argument("channel_from_paths: no paths");
    ChannelMatrix h(cfg.n_c, cfg.n_t);
    const double scale = std::sqrt(static_cast<double>(cfg.n_t) / static_cast<double>(paths.size()));

    std::vector<std::vector<std::complex<double>>> steering;
    steering.reserve(paths.size());
    for (const auto& p : paths) {
        steering.push_back(ula_response(p.aod_rad, cfg.n_t, cfg.spacing_over_lambda));
    }

    std::vector<std::complex<double>> row(static_cast<size_t>(cfg.n_t));
    for (int n = 0; n < cfg.n_c; ++n) {
        std::fill(row.begin(), row.end(), std::complex<double>(0.0, 0.0));
        for (size_t l = 0; l < paths.size(); ++l) {
            const double phase =
                -kTwoPi * paths[l].delay_s * cfg.sample_rate_hz * static_cast<double>(n) /
                static_cast<double>(cfg.n_c);
            const std::complex<double> w = paths[l].gain * std::polar(1.0, phase);
            const auto& a = steering[l];
            for (int t = 0; t < cfg.n_t; ++t) {
                row[static_cast<size_t>(t)] += w * a[static_cast<size_t>(t)];
            }
        }
        for (int t = 0; t < cfg.n_t; ++t) {
            const std::complex<double> v = scale * row[static_cast<size_t>(t)];
            h.at(n, t) = std::complex<float>(static_cast<float>(v.real()),
                                             static_cast<float>(v.imag()));
        }
    }
    return h;
}

ChannelMatrix generate_channel(const ChannelGenConfig& cfg, Rng& rng) {
    validate_config(cfg);
    std::vector<PathRealization> paths(static_cast<size_t>(cfg.paths));
    for (auto& p : paths) {
        p.gain = rng.cnormal(cfg.avg_power_gain);
        p.delay_s = rng.uniform(0.0, cfg.delay_spread_s);
        p.aod_rad = rng.uniform(cfg.aod_min_rad, cfg.aod_max_rad);
    }
    return channel_from_paths(cfg, paths);
}

Dataset generate_dataset(const ChannelGenConfig& cfg, int count) {
    validate_config(cfg);
    if (count < 0) throw std::invalid_argument("dataset count must be >= 0");
    Dataset ds;
    ds.n_c = cfg.n_c;
    ds.n_t = cfg.n_t;
    ds.samples.resize(static_cast<size_t>(count));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        Rng sample_rng(Rng::derive(cfg.seed, static_cast<uint64_t>(i)));
        ds.samples[static_cast<size_t>(i)] = generate_channel(cfg, sample_rng);
    }
    return ds;
}

std::vector<uint8_t> serialize_dataset(const Dataset& ds) {
    ByteWriter w;
    w.magic("CSID");
    w.u16(1);  // version
    w.u16(static_cast<uint16_t>(ds.n_c));
    w.u16(static_cast<uint16_t>(ds.n_t));
    w.u32(static_cast<uint32_t>(ds.samples.size()));
    for (const auto& s : ds.samples) {
        if (s.n_c != ds.n_c || s.n_t != ds.n_t) {
            throw IoError("dataset sample dims differ from header dims");
        }
        for (const auto& v : s.entries) {
            w.f32(v.real());
            w.f32(v.imag());
        }
    }
    return w.take();
}

Dataset deserialize_dataset(const uint8_t* data, size_t size) {
    ByteReader r(data, size);
    r.expect_magic("CSID", "dataset");
    const uint16_t version = r.u16();
    if (version != 1) throw IoError("unsupported dataset version " + std::to_string(version));
    Dataset ds;
    ds.n_c = r.u16();
    ds.n_t = r.u16();
    const uint32_t count = r.u32();
    if (ds.n_c < 1 || ds.n_t < 1) throw IoError("dataset header has empty dims");
    ds.samples.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ChannelMatrix m(ds.n_c, ds.n_t);
        for (auto& v : m.entries) {
            const float re = r.f32();
            const float im = r.f32();
            v = {re, im};
        }
        ds.samples.push_back(std::move(m));
    }
    if (r.remaining() != 0) throw IoError("trailing bytes after dataset payload");
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    write_file(path, serialize_dataset(ds));
}

Dataset read_dataset(const std::string& path) {
    const std::vector<uint8_t> data = read_file(path);
    return deserialize_dataset(data.data(), data.size());
}

}  // namespace deepcmc

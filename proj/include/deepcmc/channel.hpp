#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace deepcmc {

// Deterministic scalar RNG shared across the project. mt19937_64 output is
// fully specified by the standard, and all derived draws avoid the
// implementation-defined std distributions, so identical seeds reproduce
// bitwise-identical streams everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }  // [0,1)

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller on open-interval uniforms
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // CN(0, var): independent real/imag parts with variance var/2 each
    std::complex<double> cnormal(double var) {
        const double s = std::sqrt(var / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    std::mt19937_64& engine() { return gen_; }

    static uint64_t derive(uint64_t seed, uint64_t stream) {
        // splitmix64 mix of (seed, stream)
        uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// One downlink CSI realization H in C^{n_c x n_t}, row-major by subcarrier.
struct ChannelMatrix {
    int n_c = 0;
    int n_t = 0;
    std::vector<std::complex<float>> entries;

    ChannelMatrix() = default;
    ChannelMatrix(int nc, int nt)
        : n_c(nc), n_t(nt), entries(static_cast<size_t>(nc) * static_cast<size_t>(nt)) {}

    std::complex<float>& at(int n, int t) {
        return entries[static_cast<size_t>(n) * n_t + t];
    }
    const std::complex<float>& at(int n, int t) const {
        return entries[static_cast<size_t>(n) * n_t + t];
    }

    bool operator==(const ChannelMatrix& o) const {
        return n_c == o.n_c && n_t == o.n_t && entries == o.entries;
    }
};

struct Dataset {
    int n_c = 0;
    int n_t = 0;
    std::vector<ChannelMatrix> samples;

    bool operator==(const Dataset& o) const {
        return n_c == o.n_c && n_t == o.n_t && samples == o.samples;
    }
};

// Multipath ULA/OFDM generator parameters. Defaults mirror the full-scale
// scenario; training runs typically use n_c=64, n_t=16.
struct ChannelGenConfig {
    int n_c = 256;
    int n_t = 32;
    int paths = 8;                     // L >= 1
    double sample_rate_hz = 20e6;      // f_s
    double delay_spread_s = 1e-6;      // tau_l drawn from [0, delay_spread]
    double avg_power_gain = 1.0;       // sigma_alpha^2
    double spacing_over_lambda = 0.5;  // d / lambda
    double aod_min_rad = -1.0471975511965976;  // -pi/3
    double aod_max_rad = 1.0471975511965976;   //  pi/3
    uint64_t seed = 1;
};

struct PathRealization {
    std::complex<double> gain;  // alpha_l
    double delay_s;             // tau_l
    double aod_rad;             // phi_l
};

// ULA response a(phi): entry k = exp(-j 2 pi (d/lambda) k sin phi).
std::vector<std::complex<double>> ula_response(double phi, int n_t, double d_over_lambda);

// Deterministic channel from explicit path parameters (the generator's core;
// also the hook for forced-path tests).
ChannelMatrix channel_from_paths(const ChannelGenConfig& cfg,
                                 const std::vector<PathRealization>& paths);

ChannelMatrix generate_channel(const ChannelGenConfig& cfg, Rng& rng);

// count samples with per-sample derived seeds from cfg.seed
Dataset generate_dataset(const ChannelGenConfig& cfg, int count);

// Container: magic "CSID" | version u16 | n_c u16 | n_t u16 | count u32 |
// samples as interleaved (real f32, imag f32), row-major by subcarrier. LE.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);
std::vector<uint8_t> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(const uint8_t* data, size_t size);

void validate_config(const ChannelGenConfig& cfg);

}  // namespace deepcmc

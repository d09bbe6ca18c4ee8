#include <cmath>
#include <complex>
#include <stdexcept>

#include "deepcmc/pipeline.hpp"

namespace deepcmc {

namespace {

void check_same_dims(const ChannelMatrix& h, const ChannelMatrix& h_hat, const char* what) {
    if (h.n_c != h_hat.n_c || h.n_t != h_hat.n_t) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(h.n_c) + "x" + std::to_string(h.n_t) + " vs " +
                                    std::to_string(h_hat.n_c) + "x" + std::to_string(h_hat.n_t));
    }
}

}  // namespace

double nmse_ratio(const ChannelMatrix& h, const ChannelMatrix& h_hat) {
    check_same_dims(h, h_hat, "nmse");
    double err = 0, ref = 0;
    for (size_t i = 0; i < h.entries.size(); ++i) {
        const std::complex<double> a(h.entries[i].real(), h.entries[i].imag());
        const std::complex<double> b(h_hat.entries[i].real(), h_hat.entries[i].imag());
        err += std::norm(a - b);
        ref += std::norm(a);
    }
    if (ref <= 0) throw std::invalid_argument("nmse: reference matrix has zero norm");
    return err / ref;
}

double nmse_db(const ChannelMatrix& h, const ChannelMatrix& h_hat) {
    const double r = nmse_ratio(h, h_hat);
    if (r == 0) return kNmseNegInf;
    return 10.0 * std::log10(r);
}

double nmse_db_mean(const std::vector<double>& ratios) {
    if (ratios.empty()) throw std::invalid_argument("nmse_db_mean: no ratios");
    double sum = 0;
    for (double r : ratios) sum += r;
    const double mean = sum / static_cast<double>(ratios.size());
    if (mean == 0) return kNmseNegInf;
    return 10.0 * std::log10(mean);
}

double cosine_corr(const ChannelMatrix& h, const ChannelMatrix& h_hat, bool strict) {
    check_same_dims(h, h_hat, "cosine_corr");
    double acc = 0;
    int used = 0;
    for (int n = 0; n < h.n_c; ++n) {
        std::complex<double> inner(0, 0);
        double na = 0, nb = 0;
        for (int t = 0; t < h.n_t; ++t) {
            const std::complex<double> a(h.at(n, t).real(), h.at(n, t).imag());
            const std::complex<double> b(h_hat.at(n, t).real(), h_hat.at(n, t).imag());
            inner += std::conj(b) * a;
            na += std::norm(a);
            nb += std::norm(b);
        }
        if (na == 0 || nb == 0) {
            if (strict) {
                throw std::invalid_argument("cosine_corr: zero-norm subcarrier row " +
                                            std::to_string(n));
            }
            continue;
        }
        acc += std::abs(inner) / std::sqrt(na * nb);
        ++used;
    }
    if (used == 0) {
        if (strict) throw std::invalid_argument("cosine_corr: all rows degenerate");
        return 0.0;
    }
    const double rho = acc / static_cast<double>(used);
    return std::min(rho, 1.0);  // clamp the Cauchy-Schwarz bound against fp drift
}

}  // namespace deepcmc

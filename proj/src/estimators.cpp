#include "cfocal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfocal {

namespace {

void check_frame(const ComplexBuffer& r, const OfdmConfig& cfg) {
    cfg.validate();
    if (r.size() != static_cast<size_t>(cfg.frame_len()))
        throw std::invalid_argument("expected boundary-aligned frame of length " +
                                    std::to_string(cfg.frame_len()));
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

PhaseFeature cp_phase_features(const ComplexBuffer& r, const OfdmConfig& cfg) {
    check_frame(r, cfg);
    const int K = cfg.symbol_len;
    const int G = cfg.cp_len;
    PhaseFeature f;
    f.phi.reserve(static_cast<size_t>(G) * cfg.num_symbols);
    for (int s = 0; s < cfg.num_symbols; ++s) {
        const size_t base = static_cast<size_t>(s) * (K + G);
        for (int g = 0; g < G; ++g) {
            const cplx m = r[base + K + g] * std::conj(r[base + g]);
            f.phi.push_back(std::arg(m));
        }
    }
    return f;
}

CfoEstimate cp_ml_estimate(const ComplexBuffer& r, const OfdmConfig& cfg) {
    check_frame(r, cfg);
    const int K = cfg.symbol_len;
    const int G = cfg.cp_len;
    cplx pooled(0.0, 0.0);
    for (int s = 0; s < cfg.num_symbols; ++s) {
        const size_t base = static_cast<size_t>(s) * (K + G);
        for (int g = 0; g < G; ++g) pooled += r[base + K + g] * std::conj(r[base + g]);
    }
    if (std::abs(pooled) == 0.0)
        throw std::domain_error("cp_ml_estimate: zero correlation magnitude, estimate undefined");
    CfoEstimate est;
    est.theta = std::arg(pooled) / (2.0 * M_PI);
    est.hz = theta_to_hz(est.theta, cfg);
    return est;
}

double theta_to_hz(double theta, const OfdmConfig& cfg) {
    return theta * cfg.sample_rate_hz / cfg.symbol_len;
}

double hz_to_theta(double hz, const OfdmConfig& cfg) {
    return hz * cfg.symbol_len / cfg.sample_rate_hz;
}

double crlb_hz2(double snr_linear, const ComplexBuffer& x, double fs) {
    if (!(snr_linear > 0.0)) throw std::invalid_argument("crlb_hz2: snr must be positive");
    if (x.empty()) throw std::invalid_argument("crlb_hz2: empty signal");
    double weighted = 0.0;
    for (size_t n = 0; n < x.size(); ++n)
        weighted += static_cast<double>(n) * static_cast<double>(n) * std::norm(x[n]);
    if (weighted <= 0.0) throw std::invalid_argument("crlb_hz2: zero-energy weighted sum");
    const double two_pi_sq = 4.0 * M_PI * M_PI;
    return fs * fs / (two_pi_sq * snr_linear * weighted);
}

ErrorStats error_stats(const std::vector<double>& estimates_hz,
                       const std::vector<double>& truths_hz) {
    if (estimates_hz.empty() || estimates_hz.size() != truths_hz.size())
        throw std::invalid_argument("error_stats: need equal nonempty sequences");
    std::vector<double> err(estimates_hz.size());
    for (size_t i = 0; i < err.size(); ++i) err[i] = estimates_hz[i] - truths_hz[i];

    ErrorStats st;
    double sum = 0.0;
    for (double e : err) sum += e;
    st.mean = sum / static_cast<double>(err.size());
    double ss = 0.0;
    for (double e : err) ss += (e - st.mean) * (e - st.mean);
    st.variance = ss / static_cast<double>(err.size());

    std::sort(err.begin(), err.end());
    st.q1 = quantile_sorted(err, 0.25);
    st.median = quantile_sorted(err, 0.5);
    st.q3 = quantile_sorted(err, 0.75);
    return st;
}

}  // namespace cfocal

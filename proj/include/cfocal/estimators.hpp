#pragma once

#include <vector>

#include "cfocal/impairments.hpp"
#include "cfocal/ofdm.hpp"

namespace cfocal {

/// Per-frame cyclic-prefix phase sequence: for each OFDM symbol,
/// arg(r_tail .* conj(r_cp)) over the G prefix positions, concatenated in
/// time order. Length G * num_symbols, entries in (-pi, pi].
struct PhaseFeature {
    std::vector<double> phi;
};

struct CfoEstimate {
    double theta = 0.0;  // subcarrier-spacing units, in (-0.5, 0.5]
    double hz = 0.0;
};

/// Frame must be boundary-aligned with length num_symbols*(K+G).
PhaseFeature cp_phase_features(const ComplexBuffer& r, const OfdmConfig& cfg);

/// Classical estimator: theta = arg(sum of all CP correlation products)/2pi,
/// one pooled sum across the whole frame. Throws std::domain_error when the
/// pooled sum has zero magnitude (estimate undefined).
CfoEstimate cp_ml_estimate(const ComplexBuffer& r, const OfdmConfig& cfg);

double theta_to_hz(double theta, const OfdmConfig& cfg);
double hz_to_theta(double hz, const OfdmConfig& cfg);

/// Frequency-estimation variance bound in Hz^2:
/// fs^2 / ((2*pi)^2 * snr * sum_n n^2 |x[n]|^2). The fs^2 factor converts the
/// normalized-frequency bound to Hz^2.
double crlb_hz2(double snr_linear, const ComplexBuffer& x, double fs);

struct ErrorStats {
    double mean = 0.0;
    double variance = 0.0;  // population variance
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Population statistics of (estimate - truth). Quartiles use linear
/// interpolation between order statistics at rank p*(n-1).
ErrorStats error_stats(const std::vector<double>& estimates_hz,
                       const std::vector<double>& truths_hz);

}  // namespace cfocal

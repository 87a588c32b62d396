#include "cfocal/demod_loss.hpp"

#include <cmath>
#include <stdexcept>

namespace cfocal {

namespace {

constexpr double kEpsMag = 1e-12;

int gray_quadrant(uint8_t b0, uint8_t b1) {
    return b0 ? (b1 ? 2 : 3) : (b1 ? 1 : 0);
}

}  // namespace

DemodLossResult differentiable_demod_loss(const ComplexBuffer& frame, double theta_hat,
                                          const BitStream& tx_bits, const OfdmConfig& cfg) {
    cfg.validate();
    if (frame.size() != static_cast<size_t>(cfg.frame_len()))
        throw std::invalid_argument("differentiable_demod_loss: frame length mismatch");
    if (tx_bits.size() != static_cast<size_t>(cfg.bits_per_frame()))
        throw std::invalid_argument("differentiable_demod_loss: bit count mismatch");

    const int K = cfg.symbol_len;
    const int G = cfg.cp_len;
    const int sym_len = K + G;

    // Compensated signal and its theta-derivative: y = r * e^{-j2pi theta n/K},
    // dy/dtheta = -j (2pi n / K) y.
    ComplexBuffer y(frame.size()), ydot(frame.size());
    const double step = -2.0 * M_PI * theta_hat / K;
    for (size_t n = 0; n < frame.size(); ++n) {
        const double ang = step * static_cast<double>(n);
        y[n] = frame[n] * cplx(std::cos(ang), std::sin(ang));
        ydot[n] = y[n] * cplx(0.0, -2.0 * M_PI * static_cast<double>(n) / K);
    }

    DemodLossResult res;
    const long total = static_cast<long>(cfg.num_symbols) * (K - 1);
    size_t bit_pos = 0;
    for (int s = 0; s < cfg.num_symbols; ++s) {
        const size_t base = static_cast<size_t>(s) * sym_len + G;
        ComplexBuffer ts(y.begin() + base, y.begin() + base + K);
        ComplexBuffer tds(ydot.begin() + base, ydot.begin() + base + K);
        ComplexBuffer Y = dft(ts);
        ComplexBuffer Yd = dft(tds);

        for (int k = 1; k < K; ++k) {
            const cplx num = Y[k] * std::conj(Y[k - 1]);
            const cplx num_dot = Yd[k] * std::conj(Y[k - 1]) + Y[k] * std::conj(Yd[k - 1]);
            const double a = std::abs(Y[k]);
            const double b = std::abs(Y[k - 1]);
            const double den = a * b + kEpsMag;
            const double a_dot = a > kEpsMag ? std::real(std::conj(Y[k]) * Yd[k]) / a : 0.0;
            const double b_dot = b > kEpsMag ? std::real(std::conj(Y[k - 1]) * Yd[k - 1]) / b : 0.0;
            const double den_dot = a_dot * b + a * b_dot;

            const cplx soft = num / den;
            const cplx soft_dot = (num_dot * den - num * den_dot) / (den * den);

            const int q = gray_quadrant(tx_bits[bit_pos], tx_bits[bit_pos + 1]);
            bit_pos += 2;
            const cplx ideal = std::polar(1.0, q * M_PI / 2.0);

            const cplx diff = soft - ideal;
            res.loss += std::norm(diff);
            res.dloss_dtheta += 2.0 * std::real(std::conj(diff) * soft_dot);
        }
    }
    res.loss /= static_cast<double>(total);
    res.dloss_dtheta /= static_cast<double>(total);
    return res;
}

}  // namespace cfocal

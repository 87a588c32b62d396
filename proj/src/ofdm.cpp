#include "cfocal/ofdm.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cfocal {

namespace {

constexpr double kHalfPi = M_PI / 2.0;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, no scaling.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<cplx> dft_direct(const std::vector<cplx>& x, bool inverse) {
    const size_t n = x.size();
    std::vector<cplx> y(n);
    const double sgn = inverse ? 2.0 : -2.0;
    for (size_t k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (size_t m = 0; m < n; ++m) {
            double ang = sgn * M_PI * static_cast<double>(k * m) / static_cast<double>(n);
            acc += x[m] * cplx(std::cos(ang), std::sin(ang));
        }
        y[k] = acc;
    }
    return y;
}

// Gray map {00,01,11,10} -> quadrant {0,1,2,3}; phase step = quadrant * pi/2.
int gray_quadrant(uint8_t b0, uint8_t b1) {
    return b0 ? (b1 ? 2 : 3) : (b1 ? 1 : 0);
}

void quadrant_bits(int q, uint8_t& b0, uint8_t& b1) {
    static constexpr uint8_t kBits[4][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    b0 = kBits[q][0];
    b1 = kBits[q][1];
}

}  // namespace

void OfdmConfig::validate() const {
    if (symbol_len <= 0) throw std::invalid_argument("symbol_len must be positive");
    if (cp_len <= 0 || cp_len >= symbol_len)
        throw std::invalid_argument("cp_len must satisfy 0 < G < K");
    if (num_symbols < 1) throw std::invalid_argument("num_symbols must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample_rate_hz must be positive");
}

ComplexBuffer dft(const ComplexBuffer& x, bool inverse) {
    if (x.empty()) throw std::invalid_argument("dft: empty input");
    std::vector<cplx> y;
    if (is_pow2(x.size())) {
        y = x;
        fft_pow2(y, inverse);
    } else {
        y = dft_direct(x, inverse);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : y) v *= scale;
    return y;
}

FreqSymbols dqpsk_modulate(const BitStream& bits, const OfdmConfig& cfg) {
    cfg.validate();
    const size_t expected = static_cast<size_t>(cfg.bits_per_frame());
    if (bits.size() != expected)
        throw std::invalid_argument("dqpsk_modulate: expected " + std::to_string(expected) +
                                    " bits, got " + std::to_string(bits.size()));
    const int K = cfg.symbol_len;
    FreqSymbols out(cfg.num_symbols);
    size_t pos = 0;
    for (int s = 0; s < cfg.num_symbols; ++s) {
        auto& sym = out[s];
        sym.resize(K);
        double phase = M_PI / 4.0;
        sym[0] = std::polar(1.0, phase);
        for (int k = 1; k < K; ++k) {
            int q = gray_quadrant(bits[pos], bits[pos + 1]);
            pos += 2;
            phase = std::fmod(phase + q * kHalfPi, 2.0 * M_PI);
            sym[k] = std::polar(1.0, phase);
        }
    }
    return out;
}

DemodResult dqpsk_demodulate(const FreqSymbols& symbols) {
    constexpr double eps_mag = 1e-12;
    DemodResult res;
    for (const auto& sym : symbols) {
        for (size_t k = 1; k < sym.size(); ++k) {
            const cplx num = sym[k] * std::conj(sym[k - 1]);
            const double den = std::abs(sym[k]) * std::abs(sym[k - 1]) + eps_mag;
            const cplx soft = num / den;
            res.soft.push_back(soft);
            int q = static_cast<int>(std::lround(std::arg(soft) / kHalfPi));
            q = ((q % 4) + 4) % 4;
            uint8_t b0, b1;
            quadrant_bits(q, b0, b1);
            res.bits.push_back(b0);
            res.bits.push_back(b1);
        }
    }
    return res;
}

ComplexBuffer add_cyclic_prefix(const ComplexBuffer& s, int cp_len) {
    if (cp_len <= 0 || static_cast<size_t>(cp_len) >= s.size())
        throw std::invalid_argument("add_cyclic_prefix: invalid cp length");
    ComplexBuffer out;
    out.reserve(s.size() + cp_len);
    out.insert(out.end(), s.end() - cp_len, s.end());
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

ComplexBuffer remove_cyclic_prefix(const ComplexBuffer& x, int cp_len) {
    if (cp_len <= 0 || static_cast<size_t>(cp_len) >= x.size())
        throw std::invalid_argument("remove_cyclic_prefix: invalid cp length");
    return ComplexBuffer(x.begin() + cp_len, x.end());
}

FreqSymbols power_normalize(const FreqSymbols& symbols) {
    FreqSymbols out = symbols;
    for (auto& sym : out) {
        double p = 0.0;
        for (const auto& v : sym) p += std::norm(v);
        p /= static_cast<double>(sym.size());
        if (p <= 0.0) throw std::invalid_argument("power_normalize: all-zero symbol");
        const double scale = 1.0 / std::sqrt(p);
        for (auto& v : sym) v *= scale;
    }
    return out;
}

ComplexBuffer build_frame(const BitStream& bits, const OfdmConfig& cfg) {
    const FreqSymbols sym = dqpsk_modulate(bits, cfg);
    ComplexBuffer frame;
    frame.reserve(cfg.frame_len());
    for (const auto& s : sym) {
        ComplexBuffer td = dft(s, /*inverse=*/true);
        ComplexBuffer with_cp = add_cyclic_prefix(td, cfg.cp_len);
        frame.insert(frame.end(), with_cp.begin(), with_cp.end());
    }
    double p = 0.0;
    for (const auto& v : frame) p += std::norm(v);
    p /= static_cast<double>(frame.size());
    const double scale = 1.0 / std::sqrt(p);
    for (auto& v : frame) v *= scale;
    return frame;
}

DemodResult demodulate_frame(const ComplexBuffer& frame, const OfdmConfig& cfg) {
    cfg.validate();
    if (frame.size() != static_cast<size_t>(cfg.frame_len()))
        throw std::invalid_argument("demodulate_frame: frame length mismatch");
    const int sym_len = cfg.symbol_len + cfg.cp_len;
    FreqSymbols rx(cfg.num_symbols);
    for (int s = 0; s < cfg.num_symbols; ++s) {
        ComplexBuffer sym(frame.begin() + static_cast<size_t>(s) * sym_len,
                          frame.begin() + static_cast<size_t>(s + 1) * sym_len);
        rx[s] = dft(remove_cyclic_prefix(sym, cfg.cp_len));
    }
    return dqpsk_demodulate(rx);
}

double frame_airtime_s(const OfdmConfig& cfg, long n_frames) {
    cfg.validate();
    if (n_frames < 0) throw std::invalid_argument("frame_airtime_s: negative frame count");
    return static_cast<double>(n_frames) * cfg.frame_len() / cfg.sample_rate_hz;
}

double bit_error_rate(const BitStream& tx, const BitStream& rx) {
    if (tx.empty()) throw std::invalid_argument("bit_error_rate: empty input");
    if (tx.size() != rx.size())
        throw std::invalid_argument("bit_error_rate: length mismatch");
    size_t diff = 0;
    for (size_t i = 0; i < tx.size(); ++i) diff += (tx[i] != rx[i]) ? 1 : 0;
    return static_cast<double>(diff) / static_cast<double>(tx.size());
}

}  // namespace cfocal

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace cfocal {

using cplx = std::complex<double>;

/// Time-domain complex baseband samples.
using ComplexBuffer = std::vector<cplx>;

/// One entry per bit, each 0 or 1.
using BitStream = std::vector<uint8_t>;

/// Per-OFDM-symbol vectors of subcarrier values, one inner vector per symbol.
using FreqSymbols = std::vector<std::vector<cplx>>;

enum class Modulation { Dqpsk };

/// Frame geometry and rates. Defaults match the reference configuration
/// (K=128, G=32, 10 symbols, 1.92 MHz).
struct OfdmConfig {
    int symbol_len = 128;      // K, samples
    int cp_len = 32;           // G, samples
    int num_symbols = 10;
    double sample_rate_hz = 1.92e6;
    Modulation modulation = Modulation::Dqpsk;

    int frame_len() const { return num_symbols * (symbol_len + cp_len); }
    double subcarrier_spacing_hz() const { return sample_rate_hz / symbol_len; }
    /// DQPSK across subcarriers: subcarrier 0 is the phase reference,
    /// so each OFDM symbol carries 2*(K-1) bits.
    int bits_per_frame() const { return 2 * (symbol_len - 1) * num_symbols; }

    /// Throws std::invalid_argument on violated invariants
    /// (K > 0, 0 < G < K, num_symbols >= 1, sample_rate > 0).
    void validate() const;

    bool operator==(const OfdmConfig&) const = default;
};

/// Unitary DFT (1/sqrt(N) both directions). Radix-2 for power-of-two
/// lengths, direct summation otherwise. Throws on empty input.
ComplexBuffer dft(const ComplexBuffer& x, bool inverse = false);

/// Maps bits to DQPSK subcarriers: reference subcarrier at phase pi/4, each
/// following subcarrier advances by the Gray-mapped phase step
/// {00,01,11,10} -> {0, pi/2, pi, 3pi/2}. Requires 2*(K-1)*num_symbols bits.
FreqSymbols dqpsk_modulate(const BitStream& bits, const OfdmConfig& cfg);

struct DemodResult {
    BitStream bits;
    /// Normalized differential symbols, num_symbols*(K-1) entries in
    /// symbol-major order: soft = Y[k]*conj(Y[k-1]) / (|Y[k]||Y[k-1]| + eps).
    std::vector<cplx> soft;
};

/// Differential demodulation; invariant to a common phase rotation of Y.
DemodResult dqpsk_demodulate(const FreqSymbols& symbols);

/// Prepends the last cp_len samples: [s_tail; s]. Input length is the symbol
/// length; output is symbol_len + cp_len.
ComplexBuffer add_cyclic_prefix(const ComplexBuffer& s, int cp_len);

/// Drops the first cp_len samples; exact inverse of add_cyclic_prefix.
ComplexBuffer remove_cyclic_prefix(const ComplexBuffer& x, int cp_len);

/// Scales each OFDM symbol so its mean per-subcarrier power is 1.
/// Throws on an all-zero symbol.
FreqSymbols power_normalize(const FreqSymbols& symbols);

/// bits -> DQPSK -> inverse DFT -> CP, concatenated over symbols, then the
/// whole frame is scaled to unit mean sample power.
ComplexBuffer build_frame(const BitStream& bits, const OfdmConfig& cfg);

/// Per symbol: remove CP, DFT; then differential demodulation of the frame.
DemodResult demodulate_frame(const ComplexBuffer& frame, const OfdmConfig& cfg);

/// n_frames * num_symbols * (K+G) / sample_rate.
double frame_airtime_s(const OfdmConfig& cfg, long n_frames);

/// Fraction of differing positions. Throws on length mismatch or empty input.
double bit_error_rate(const BitStream& tx, const BitStream& rx);

}  // namespace cfocal

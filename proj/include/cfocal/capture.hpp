#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfocal/impairments.hpp"
#include "cfocal/ofdm.hpp"

namespace cfocal {

/// Sidecar metadata for a raw-IQ capture file.
struct CaptureMeta {
    std::string device_id;
    double sample_rate_hz = 0.0;
    double carrier_hz = 0.0;
    int symbol_len = 0;
    int cp_len = 0;
    int num_symbols = 0;
    int n_frames = 0;
    std::string bits_file;
    std::optional<uint64_t> seed;        // emulated captures only
    std::optional<double> true_theta;    // emulated captures only, for validation

    OfdmConfig ofdm() const;
};

struct Capture {
    ComplexBuffer samples;
    CaptureMeta meta;
    BitStream bits;  // transmitted bits, n_frames * bits_per_frame entries
};

/// Packed bit file helpers, most-significant-bit first.
void write_bits(const std::string& path, const BitStream& bits);
BitStream read_bits(const std::string& path, size_t bit_count);

/// Writes <base>.cf32 (interleaved little-endian float32 I/Q), <base>.meta
/// (key = value text) and <base>.bits.
void write_capture(const std::string& base_path, const ComplexBuffer& samples,
                   const CaptureMeta& meta, const BitStream& bits);

/// Accepts a base path or the .meta path. Throws on missing metadata keys,
/// truncated data (odd float count), or a sample count inconsistent with the
/// frame geometry.
Capture ingest_capture(const std::string& path);

struct EmulatedCapture {
    std::string base_path;
    CaptureMeta meta;
    Theta true_theta;
};

/// Renders n_frames random-bit frames through the device fingerprint with a
/// fresh random channel per frame and writes capture + metadata, including
/// the ground-truth theta for validation.
///
/// The channel defaults model indoor propagation at this bandwidth: the
/// delay spread is a fraction of a sample, so taps beyond the first carry
/// little power (max_taps 2, ~13 dB/tap decay). max_taps 1 gives a
/// frequency-flat fading channel.
EmulatedCapture emulate_device_captures(const DeviceProfile& profile, int n_frames,
                                        const OfdmConfig& cfg, double snr_db, uint64_t seed,
                                        const std::string& base_path, int max_taps = 2,
                                        double decay = 3.0);

}  // namespace cfocal

#pragma once

#include <string>
#include <vector>

#include "cfocal/ofdm.hpp"
#include "cfocal/rng.hpp"

namespace cfocal {

/// Carrier frequency offset in subcarrier-spacing units: the received sample
/// n is rotated by exp(j*2*pi*theta*n/K), so delta_f_hz = theta * fs / K and
/// the identifiable range is (-0.5, 0.5].
struct Theta {
    double value = 0.0;

    double to_hz(const OfdmConfig& cfg) const {
        return value * cfg.sample_rate_hz / cfg.symbol_len;
    }
    static Theta from_hz(double hz, const OfdmConfig& cfg) {
        return Theta{hz * cfg.symbol_len / cfg.sample_rate_hz};
    }
};

/// Complex channel gains; tap count must stay within the cyclic prefix.
struct ChannelTaps {
    std::vector<cplx> taps;

    size_t length() const { return taps.size(); }
};

/// Identity channel.
ChannelTaps unit_channel();

/// Random channel with L ~ U{1..max_taps} taps, exponentially decaying power
/// profile exp(-decay*l), normalized to unit total power.
ChannelTaps draw_random_channel(Rng& rng, int max_taps = 8, double decay = 0.7);

/// Parametric receiver fingerprint. The local oscillator error drives the
/// CFO: theta = lo_ppm * 1e-6 * carrier_hz * K / fs.
struct DeviceProfile {
    std::string name;
    double sfo_ppm = 0.0;
    double carrier_hz = 2.4e9;
    double lo_ppm = 0.0;
    double phase_noise_linewidth_hz = 0.0;
    double iq_gain = 1.0;       // linear amplitude ratio
    double iq_phase_rad = 0.0;

    Theta cfo_theta(const OfdmConfig& cfg) const {
        return Theta::from_hz(lo_ppm * 1e-6 * carrier_hz, cfg);
    }
    /// Throws std::invalid_argument on non-finite fields, iq_gain <= 0,
    /// negative linewidth, or a resulting |theta| >= 0.5.
    void validate(const OfdmConfig& cfg) const;

    static DeviceProfile neutral(const std::string& name = "neutral");
    static DeviceProfile stable();
    static DeviceProfile mid();
    static DeviceProfile lowcost();
};

struct NoiseSpec {
    double snr_db = 30.0;
};

/// y[n] = x[n] * exp(j*2*pi*theta*(n+start_index)/K). start_index threads the
/// phase across concatenated buffers so CFO accumulates over a whole capture.
ComplexBuffer apply_cfo(const ComplexBuffer& x, Theta theta, const OfdmConfig& cfg,
                        long start_index = 0);

/// Linear convolution with the taps, truncated to the input length.
/// Throws if the channel is longer than the cyclic prefix.
ComplexBuffer apply_multipath(const ComplexBuffer& x, const ChannelTaps& h, int cp_len);

/// Complex white Gaussian noise at the requested SNR relative to the mean
/// input sample power, variance split equally between I and Q.
ComplexBuffer add_awgn(const ComplexBuffer& x, NoiseSpec spec, Rng& rng);

/// Wiener-process oscillator phase noise: phi[0] = 0,
/// phi[n] = phi[n-1] + w[n], w ~ N(0, 2*pi*linewidth/fs).
ComplexBuffer apply_phase_noise(const ComplexBuffer& x, double linewidth_hz, double fs,
                                Rng& rng);

/// Receiver gain/phase mismatch: y = mu*x + nu*conj(x) with
/// mu = (1 + g*exp(-j*phi))/2, nu = (1 - g*exp(j*phi))/2.
ComplexBuffer apply_iq_imbalance(const ComplexBuffer& x, double gain, double phase_rad);

/// Fractional resampling at ratio (1 + ppm*1e-6) using a 16-tap windowed-sinc
/// interpolator; output length floor(N/(1+ppm*1e-6)).
ComplexBuffer apply_sfo(const ComplexBuffer& x, double ppm);

struct RenderResult {
    ComplexBuffer capture;
    Theta true_theta;
};

/// Renders concatenated frames through the receiver chain:
/// multipath -> SFO -> CFO -> phase noise -> IQ imbalance -> AWGN.
///
/// Multipath and SFO act per frame (`channels` holds either one shared channel
/// or one per frame). Per-frame SFO is evaluated on the nominal frame grid so
/// frames stay boundary-aligned, matching a receiver that re-times each frame;
/// CFO and phase noise accumulate continuously across the capture.
RenderResult render_capture(const std::vector<ComplexBuffer>& frames,
                            const DeviceProfile& profile,
                            const std::vector<ChannelTaps>& channels, NoiseSpec noise,
                            const OfdmConfig& cfg, Rng& rng);

/// Single shared channel convenience overload.
RenderResult render_capture(const std::vector<ComplexBuffer>& frames,
                            const DeviceProfile& profile, const ChannelTaps& h,
                            NoiseSpec noise, const OfdmConfig& cfg, Rng& rng);

}  // namespace cfocal

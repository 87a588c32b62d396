#include "cfocal/impairments.hpp"

#include <cmath>
#include <stdexcept>

namespace cfocal {

namespace {

// Windowed-sinc interpolation at fractional position t, zero outside [0, N).
// 16 taps, Hann window of half-width 8.
cplx interp_sinc16(const ComplexBuffer& x, double t) {
    constexpr int kHalf = 8;
    const long n = static_cast<long>(x.size());
    const long i0 = static_cast<long>(std::floor(t)) - (kHalf - 1);
    cplx acc(0.0, 0.0);
    for (long i = i0; i < i0 + 2 * kHalf; ++i) {
        if (i < 0 || i >= n) continue;
        const double d = t - static_cast<double>(i);
        double w;
        if (d == 0.0) {
            w = 1.0;
        } else {
            const double pd = M_PI * d;
            w = std::sin(pd) / pd * (0.5 + 0.5 * std::cos(pd / kHalf));
        }
        acc += x[i] * w;
    }
    return acc;
}

ComplexBuffer resample(const ComplexBuffer& x, double ratio, size_t out_len) {
    ComplexBuffer y(out_len);
    for (size_t m = 0; m < out_len; ++m) y[m] = interp_sinc16(x, ratio * static_cast<double>(m));
    return y;
}

}  // namespace

ChannelTaps unit_channel() { return ChannelTaps{{cplx(1.0, 0.0)}}; }

ChannelTaps draw_random_channel(Rng& rng, int max_taps, double decay) {
    const int L = rng.uniform_int(1, max_taps);
    ChannelTaps h;
    h.taps.resize(L);
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
        h.taps[l] = rng.cgaussian() * std::sqrt(std::exp(-decay * l));
        total += std::norm(h.taps[l]);
    }
    const double scale = 1.0 / std::sqrt(total);
    for (auto& t : h.taps) t *= scale;
    return h;
}

void DeviceProfile::validate(const OfdmConfig& cfg) const {
    for (double v : {sfo_ppm, carrier_hz, lo_ppm, phase_noise_linewidth_hz, iq_gain, iq_phase_rad})
        if (!std::isfinite(v)) throw std::invalid_argument("device profile: non-finite field");
    if (iq_gain <= 0.0) throw std::invalid_argument("device profile: iq_gain must be positive");
    if (phase_noise_linewidth_hz < 0.0)
        throw std::invalid_argument("device profile: negative phase noise linewidth");
    if (std::abs(cfo_theta(cfg).value) >= 0.5)
        throw std::invalid_argument("device profile: |theta| must stay below 0.5");
}

DeviceProfile DeviceProfile::neutral(const std::string& name) {
    DeviceProfile p;
    p.name = name;
    return p;
}

DeviceProfile DeviceProfile::stable() {
    DeviceProfile p;
    p.name = "stable";
    p.lo_ppm = 0.5;
    p.phase_noise_linewidth_hz = 10.0;
    p.iq_gain = 1.005;
    p.iq_phase_rad = 0.5 * M_PI / 180.0;
    return p;
}

DeviceProfile DeviceProfile::mid() {
    DeviceProfile p;
    p.name = "mid";
    p.lo_ppm = 1.5;
    p.phase_noise_linewidth_hz = 100.0;
    p.iq_gain = 1.02;
    p.iq_phase_rad = 1.0 * M_PI / 180.0;
    return p;
}

DeviceProfile DeviceProfile::lowcost() {
    DeviceProfile p;
    p.name = "lowcost";
    p.lo_ppm = 2.5;
    p.phase_noise_linewidth_hz = 500.0;
    p.iq_gain = 1.1;
    p.iq_phase_rad = 3.0 * M_PI / 180.0;
    p.sfo_ppm = 20.0;
    return p;
}

ComplexBuffer apply_cfo(const ComplexBuffer& x, Theta theta, const OfdmConfig& cfg,
                        long start_index) {
    if (start_index < 0) throw std::invalid_argument("apply_cfo: negative start index");
    ComplexBuffer y(x.size());
    const double step = 2.0 * M_PI * theta.value / cfg.symbol_len;
    for (size_t n = 0; n < x.size(); ++n) {
        const double ang = step * static_cast<double>(start_index + static_cast<long>(n));
        y[n] = x[n] * cplx(std::cos(ang), std::sin(ang));
    }
    return y;
}

ComplexBuffer apply_multipath(const ComplexBuffer& x, const ChannelTaps& h, int cp_len) {
    const size_t L = h.length();
    if (L < 1) throw std::invalid_argument("apply_multipath: empty channel");
    if (L > static_cast<size_t>(cp_len))
        throw std::invalid_argument("apply_multipath: channel longer than cyclic prefix");
    ComplexBuffer y(x.size(), cplx(0.0, 0.0));
    for (size_t n = 0; n < x.size(); ++n) {
        cplx acc(0.0, 0.0);
        const size_t lmax = std::min(L - 1, n);
        for (size_t l = 0; l <= lmax; ++l) acc += h.taps[l] * x[n - l];
        y[n] = acc;
    }
    return y;
}

ComplexBuffer add_awgn(const ComplexBuffer& x, NoiseSpec spec, Rng& rng) {
    double p = 0.0;
    for (const auto& v : x) p += std::norm(v);
    p /= static_cast<double>(x.size());
    if (p <= 0.0) throw std::invalid_argument("add_awgn: zero-power input");
    const double noise_var = p / std::pow(10.0, spec.snr_db / 10.0);
    const double sigma_c = std::sqrt(noise_var / 2.0);
    ComplexBuffer y(x.size());
    for (size_t n = 0; n < x.size(); ++n) {
        const double re = rng.gaussian();
        const double im = rng.gaussian();
        y[n] = x[n] + cplx(sigma_c * re, sigma_c * im);
    }
    return y;
}

ComplexBuffer apply_phase_noise(const ComplexBuffer& x, double linewidth_hz, double fs,
                                Rng& rng) {
    if (linewidth_hz < 0.0) throw std::invalid_argument("apply_phase_noise: negative linewidth");
    ComplexBuffer y(x.size());
    if (x.empty()) return y;
    const double sigma = std::sqrt(2.0 * M_PI * linewidth_hz / fs);
    double phi = 0.0;
    y[0] = x[0];
    for (size_t n = 1; n < x.size(); ++n) {
        phi += sigma * rng.gaussian();
        y[n] = x[n] * cplx(std::cos(phi), std::sin(phi));
    }
    return y;
}

ComplexBuffer apply_iq_imbalance(const ComplexBuffer& x, double gain, double phase_rad) {
    if (gain <= 0.0) throw std::invalid_argument("apply_iq_imbalance: gain must be positive");
    const cplx mu = (1.0 + gain * std::polar(1.0, -phase_rad)) / 2.0;
    const cplx nu = (1.0 - gain * std::polar(1.0, phase_rad)) / 2.0;
    ComplexBuffer y(x.size());
    for (size_t n = 0; n < x.size(); ++n) y[n] = mu * x[n] + nu * std::conj(x[n]);
    return y;
}

ComplexBuffer apply_sfo(const ComplexBuffer& x, double ppm) {
    if (std::abs(ppm) >= 1000.0) throw std::invalid_argument("apply_sfo: |ppm| must be < 1000");
    if (ppm == 0.0) return x;
    const double ratio = 1.0 + ppm * 1e-6;
    const size_t out_len = static_cast<size_t>(std::floor(static_cast<double>(x.size()) / ratio));
    return resample(x, ratio, out_len);
}

RenderResult render_capture(const std::vector<ComplexBuffer>& frames,
                            const DeviceProfile& profile,
                            const std::vector<ChannelTaps>& channels, NoiseSpec noise,
                            const OfdmConfig& cfg, Rng& rng) {
    cfg.validate();
    profile.validate(cfg);
    if (frames.empty()) throw std::invalid_argument("render_capture: no frames");
    if (channels.size() != 1 && channels.size() != frames.size())
        throw std::invalid_argument("render_capture: need one channel or one per frame");

    const double ratio = 1.0 + profile.sfo_ppm * 1e-6;
    ComplexBuffer capture;
    capture.reserve(frames.size() * frames.front().size());
    for (size_t i = 0; i < frames.size(); ++i) {
        const ChannelTaps& h = channels.size() == 1 ? channels.front() : channels[i];
        ComplexBuffer f = apply_multipath(frames[i], h, cfg.cp_len);
        if (profile.sfo_ppm != 0.0) f = resample(f, ratio, f.size());
        capture.insert(capture.end(), f.begin(), f.end());
    }

    const Theta theta = profile.cfo_theta(cfg);
    capture = apply_cfo(capture, theta, cfg, 0);
    if (profile.phase_noise_linewidth_hz > 0.0)
        capture = apply_phase_noise(capture, profile.phase_noise_linewidth_hz,
                                    cfg.sample_rate_hz, rng);
    capture = apply_iq_imbalance(capture, profile.iq_gain, profile.iq_phase_rad);
    capture = add_awgn(capture, noise, rng);
    return RenderResult{std::move(capture), theta};
}

RenderResult render_capture(const std::vector<ComplexBuffer>& frames,
                            const DeviceProfile& profile, const ChannelTaps& h,
                            NoiseSpec noise, const OfdmConfig& cfg, Rng& rng) {
    return render_capture(frames, profile, std::vector<ChannelTaps>{h}, noise, cfg, rng);
}

}  // namespace cfocal

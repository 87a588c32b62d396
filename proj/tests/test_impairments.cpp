#include <cmath>

#include "cfocal/estimators.hpp"
#include "cfocal/impairments.hpp"
#include "cfocal/ofdm.hpp"
#include "cfocal/rng.hpp"
#include "doctest.h"

using namespace cfocal;

namespace {

BitStream random_bits(size_t n, Rng& rng) {
    BitStream b(n);
    for (auto& x : b) x = static_cast<uint8_t>(rng.next_u64() & 1);
    return b;
}

ComplexBuffer random_buffer(size_t n, Rng& rng) {
    ComplexBuffer x(n);
    for (auto& v : x) v = rng.cgaussian();
    return x;
}

}  // namespace

TEST_CASE("apply_cfo: quarter-spacing worked example") {
    OfdmConfig cfg;
    cfg.symbol_len = 4;
    cfg.cp_len = 1;
    ComplexBuffer x(4, cplx(1, 0));
    auto y = apply_cfo(x, Theta{1.0}, cfg, 0);
    const cplx expected[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(y[i] - expected[i]) < 1e-12);
}

TEST_CASE("apply_cfo: zero offset is identity, offsets compose additively") {
    OfdmConfig cfg;
    Rng rng(1);
    auto x = random_buffer(256, rng);
    auto y0 = apply_cfo(x, Theta{0.0}, cfg);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y0[i] - x[i]) < 1e-15);

    auto chained = apply_cfo(apply_cfo(x, Theta{0.17}, cfg), Theta{0.21}, cfg);
    auto direct = apply_cfo(x, Theta{0.38}, cfg);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(chained[i] - direct[i]) < 1e-12);
}

TEST_CASE("apply_cfo: energy preserving and start_index threads phase") {
    OfdmConfig cfg;
    Rng rng(2);
    auto x = random_buffer(512, rng);
    auto y = apply_cfo(x, Theta{0.3}, cfg, 100);
    double ex = 0, ey = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        ex += std::norm(x[i]);
        ey += std::norm(y[i]);
    }
    CHECK(std::abs(ex - ey) / ex < 1e-12);

    // Rotating [x; x] in one call equals rotating halves with threaded start.
    ComplexBuffer both = x;
    both.insert(both.end(), x.begin(), x.end());
    auto whole = apply_cfo(both, Theta{0.3}, cfg, 0);
    auto tail = apply_cfo(x, Theta{0.3}, cfg, static_cast<long>(x.size()));
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(whole[x.size() + i] - tail[i]) < 1e-12);
}

TEST_CASE("apply_multipath: identity and pure delay") {
    Rng rng(3);
    auto x = random_buffer(64, rng);
    auto y = apply_multipath(x, unit_channel(), 8);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    ChannelTaps delay{{cplx(0, 0), cplx(1, 0)}};
    auto d = apply_multipath(x, delay, 8);
    CHECK(d[0] == cplx(0, 0));
    for (size_t i = 1; i < x.size(); ++i) CHECK(d[i] == x[i - 1]);
}

TEST_CASE("apply_multipath: channel longer than CP rejected") {
    ChannelTaps h;
    h.taps.assign(9, cplx(0.3, 0));
    CHECK_THROWS_AS(apply_multipath(ComplexBuffer(32), h, 8), std::invalid_argument);
}

TEST_CASE("apply_multipath: post-DFT subcarriers match circulant-channel prediction") {
    // With a cyclic prefix, per-symbol DFT outputs equal the clean subcarriers
    // times the channel frequency response; exact for symbols past the first.
    OfdmConfig cfg;
    Rng rng(4);
    auto bits = random_bits(cfg.bits_per_frame(), rng);
    auto clean = dqpsk_modulate(bits, cfg);
    auto frame = build_frame(bits, cfg);

    ChannelTaps h;
    h.taps = {cplx(0.8, 0.1), cplx(0, 0), cplx(-0.3, 0.2), cplx(0.1, -0.4)};
    auto rx = apply_multipath(frame, h, cfg.cp_len);

    // Channel frequency response = DFT of zero-padded taps (unnormalized).
    ComplexBuffer padded(cfg.symbol_len, cplx(0, 0));
    for (size_t l = 0; l < h.taps.size(); ++l) padded[l] = h.taps[l];
    auto H = dft(padded);
    const double unnorm = std::sqrt(static_cast<double>(cfg.symbol_len));

    // build_frame rescales the frame after modulation; recover that factor.
    const int sym_len = cfg.symbol_len + cfg.cp_len;
    double p = 0.0;
    {
        ComplexBuffer unscaled;
        for (const auto& s : clean) {
            auto with_cp = add_cyclic_prefix(dft(s, true), cfg.cp_len);
            unscaled.insert(unscaled.end(), with_cp.begin(), with_cp.end());
        }
        for (const auto& v : unscaled) p += std::norm(v);
    }
    const double frame_scale = 1.0 / std::sqrt(p / cfg.frame_len());

    for (int s = 1; s < cfg.num_symbols; ++s) {
        ComplexBuffer sym(rx.begin() + s * sym_len, rx.begin() + (s + 1) * sym_len);
        auto Y = dft(remove_cyclic_prefix(sym, cfg.cp_len));
        for (int k = 0; k < cfg.symbol_len; ++k) {
            cplx predicted = clean[s][k] * frame_scale * H[k] * unnorm;
            CHECK(std::abs(Y[k] - predicted) < 1e-9);
        }
    }
}

TEST_CASE("add_awgn: vanishing noise, determinism, measured SNR") {
    Rng rng(5);
    auto x = random_buffer(1024, rng);

    Rng r1(77), r2(77);
    auto hi = add_awgn(x, NoiseSpec{300.0}, r1);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(hi[i] - x[i]) <= 1e-12 * std::max(1.0, std::abs(x[i])));

    auto same = add_awgn(x, NoiseSpec{300.0}, r2);
    CHECK(same == hi);

    ComplexBuffer unit(1'000'000, cplx(1.0, 0.0));
    Rng r3(9001);
    auto noisy = add_awgn(unit, NoiseSpec{10.0}, r3);
    double noise_p = 0;
    for (size_t i = 0; i < unit.size(); ++i) noise_p += std::norm(noisy[i] - unit[i]);
    noise_p /= static_cast<double>(unit.size());
    const double measured_db = -10.0 * std::log10(noise_p);
    CHECK(measured_db == doctest::Approx(10.0).epsilon(0.01));

    ComplexBuffer zeros(16, cplx(0, 0));
    CHECK_THROWS_AS(add_awgn(zeros, NoiseSpec{10.0}, r3), std::invalid_argument);
}

TEST_CASE("apply_phase_noise: identity at zero linewidth, unit modulus") {
    Rng rng(6);
    auto x = random_buffer(256, rng);
    Rng r1(1);
    auto y0 = apply_phase_noise(x, 0.0, 1.92e6, r1);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y0[i] == x[i]);

    Rng r2(2);
    auto y = apply_phase_noise(x, 500.0, 1.92e6, r2);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(std::abs(y[i]) - std::abs(x[i])) < 1e-12);

    CHECK_THROWS_AS(apply_phase_noise(x, -1.0, 1.92e6, r2), std::invalid_argument);
}

TEST_CASE("apply_phase_noise: variance grows linearly at the Wiener rate") {
    const double fs = 1.92e6;
    const double lw = 200.0;
    const int n = 64;
    const int trials = 10000;
    ComplexBuffer ones(n, cplx(1.0, 0.0));
    double var_acc = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(42, t));
        auto y = apply_phase_noise(ones, lw, fs, rng);
        const double phi = std::arg(y[n - 1]);
        var_acc += phi * phi;
    }
    const double measured = var_acc / trials;
    const double expected = 2.0 * M_PI * lw / fs * (n - 1);
    CHECK(measured == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("apply_iq_imbalance: identity and mixing coefficients") {
    Rng rng(8);
    auto x = random_buffer(64, rng);
    auto y = apply_iq_imbalance(x, 1.0, 0.0);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-15);

    // g=1.1, phi=0: mu = 1.05, nu = -0.05.
    auto z = apply_iq_imbalance(x, 1.1, 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        cplx expected = 1.05 * x[i] - 0.05 * std::conj(x[i]);
        CHECK(std::abs(z[i] - expected) < 1e-12);
    }
    CHECK_THROWS_AS(apply_iq_imbalance(x, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("apply_iq_imbalance: image tone power via DFT inspection") {
    const int n = 256;
    const int bin = 19;
    ComplexBuffer tone(n);
    for (int i = 0; i < n; ++i) tone[i] = std::polar(1.0, 2.0 * M_PI * bin * i / n);
    const double g = 1.1, phi = 5.0 * M_PI / 180.0;
    auto y = apply_iq_imbalance(tone, g, phi);
    auto Y = dft(y);
    const cplx mu = (1.0 + g * std::polar(1.0, -phi)) / 2.0;
    const cplx nu = (1.0 - g * std::polar(1.0, phi)) / 2.0;
    const double direct_p = std::norm(Y[bin]);
    const double image_p = std::norm(Y[n - bin]);
    CHECK(image_p / direct_p == doctest::Approx(std::norm(nu) / std::norm(mu)).epsilon(1e-9));
}

TEST_CASE("apply_sfo: identity, length formula, spectral shift") {
    Rng rng(10);
    auto x = random_buffer(512, rng);
    auto y0 = apply_sfo(x, 0.0);
    CHECK(y0 == x);

    ComplexBuffer big(1'000'000, cplx(1, 0));
    auto y = apply_sfo(big, 100.0);
    CHECK(std::llabs(static_cast<long long>(y.size()) - 999900ll) <= 1);

    // Tone at bin 100 of 4096 moves by the resampling ratio.
    const int n = 4096;
    const double f = 100.0 / n;
    ComplexBuffer tone(n);
    for (int i = 0; i < n; ++i) tone[i] = std::polar(1.0, 2.0 * M_PI * f * i);
    const double ppm = 800.0;
    auto z = apply_sfo(tone, ppm);
    z.resize(2048);  // interior window, clear of edge transients
    auto Z = dft(z);
    size_t peak = 0;
    for (size_t k = 1; k < Z.size(); ++k)
        if (std::norm(Z[k]) > std::norm(Z[peak])) peak = k;
    const double expected_bin = f * (1.0 + ppm * 1e-6) * 2048;
    CHECK(std::abs(static_cast<double>(peak) - expected_bin) <= 1.0);
}

TEST_CASE("draw_random_channel: invariants") {
    Rng rng(33);
    for (int i = 0; i < 200; ++i) {
        auto h = draw_random_channel(rng, 8);
        CHECK(h.length() >= 1);
        CHECK(h.length() <= 8);
        double p = 0;
        for (const auto& t : h.taps) p += std::norm(t);
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("multipath preserves expected power under unit-power channels") {
    OfdmConfig cfg;
    Rng rng(55);
    double ratio_acc = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        auto frame = build_frame(random_bits(cfg.bits_per_frame(), rng), cfg);
        auto h = draw_random_channel(rng, 8);
        auto y = apply_multipath(frame, h, cfg.cp_len);
        double pin = 0, pout = 0;
        for (const auto& v : frame) pin += std::norm(v);
        for (const auto& v : y) pout += std::norm(v);
        ratio_acc += pout / pin;
    }
    CHECK(ratio_acc / trials == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("render_capture: neutral profile passes signal through") {
    OfdmConfig cfg;
    Rng rng(60);
    std::vector<ComplexBuffer> frames;
    BitStream bits;
    for (int i = 0; i < 3; ++i) {
        auto b = random_bits(cfg.bits_per_frame(), rng);
        frames.push_back(build_frame(b, cfg));
    }
    Rng render_rng(61);
    auto res = render_capture(frames, DeviceProfile::neutral(), unit_channel(),
                              NoiseSpec{300.0}, cfg, render_rng);
    CHECK(res.true_theta.value == 0.0);
    REQUIRE(res.capture.size() == frames.size() * frames[0].size());
    size_t pos = 0;
    for (const auto& f : frames)
        for (const auto& v : f) CHECK(std::abs(res.capture[pos++] - v) < 1e-9);
}

TEST_CASE("render_capture: lowcost oscillator maps to theta 0.4") {
    OfdmConfig cfg;
    auto p = DeviceProfile::lowcost();
    CHECK(p.cfo_theta(cfg).value == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("render_capture: deterministic under a fixed seed") {
    OfdmConfig cfg;
    Rng rng(70);
    std::vector<ComplexBuffer> frames{build_frame(random_bits(cfg.bits_per_frame(), rng), cfg)};
    auto h = draw_random_channel(rng, 8);
    Rng r1(123), r2(123);
    auto a = render_capture(frames, DeviceProfile::lowcost(), h, NoiseSpec{15.0}, cfg, r1);
    auto b = render_capture(frames, DeviceProfile::lowcost(), h, NoiseSpec{15.0}, cfg, r2);
    CHECK(a.capture == b.capture);
}

TEST_CASE("render_capture: sfo keeps the frame grid; cfo estimation still lands") {
    OfdmConfig cfg;
    Rng rng(81);
    std::vector<ComplexBuffer> frames;
    for (int i = 0; i < 4; ++i)
        frames.push_back(build_frame(random_bits(cfg.bits_per_frame(), rng), cfg));
    DeviceProfile p = DeviceProfile::neutral();
    p.sfo_ppm = 20.0;
    p.lo_ppm = 2.5;  // theta 0.4 at the default 2.4 GHz carrier
    Rng render_rng(82);
    auto res = render_capture(frames, p, unit_channel(), NoiseSpec{300.0}, cfg, render_rng);
    REQUIRE(res.capture.size() == frames.size() * 1600);
    // Every frame, including the last, remains estimable at its boundary.
    for (size_t i = 0; i < frames.size(); ++i) {
        ComplexBuffer fr(res.capture.begin() + i * 1600, res.capture.begin() + (i + 1) * 1600);
        auto est = cp_ml_estimate(fr, cfg);
        CHECK(est.theta == doctest::Approx(0.4).epsilon(2e-3));
    }
}

TEST_CASE("device profiles validate against the frame config") {
    OfdmConfig cfg;
    DeviceProfile bad = DeviceProfile::neutral();
    bad.lo_ppm = 4.0;  // 0.64 subcarrier spacings at 2.4 GHz: outside (-0.5, 0.5)
    CHECK_THROWS_AS(bad.validate(cfg), std::invalid_argument);
    DeviceProfile neg = DeviceProfile::neutral();
    neg.iq_gain = -1.0;
    CHECK_THROWS_AS(neg.validate(cfg), std::invalid_argument);
}

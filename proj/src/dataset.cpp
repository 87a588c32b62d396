#include "cfocal/dataset.hpp"

#include <stdexcept>

namespace cfocal {

namespace {

// Seed-stream tags keeping train, validation and evaluation draws disjoint.
constexpr uint64_t kTrainStream = 0x1000000000ull;
constexpr uint64_t kValStream = 0x2000000000ull;

BitStream random_bits(size_t n, Rng& rng) {
    BitStream b(n);
    for (auto& x : b) x = static_cast<uint8_t>(rng.next_u64() & 1);
    return b;
}

}  // namespace

void SimDatasetSpec::validate() const {
    if (n_train < 1 || n_val < 1) throw std::invalid_argument("SimDatasetSpec: empty split");
    if (snr_db_min > snr_db_max || theta_min > theta_max ||
        linewidth_min_hz > linewidth_max_hz || iq_gain_min > iq_gain_max ||
        iq_phase_min_deg > iq_phase_max_deg || sfo_min_ppm > sfo_max_ppm)
        throw std::invalid_argument("SimDatasetSpec: ill-ordered range");
    if (multipath_max_taps < 1) throw std::invalid_argument("SimDatasetSpec: no channel taps");
    if (linewidth_min_hz < 0 || iq_gain_min <= 0)
        throw std::invalid_argument("SimDatasetSpec: invalid impairment range");
    if (theta_min < -0.45 || theta_max > 0.45)
        throw std::invalid_argument("SimDatasetSpec: labels must stay within |theta| <= 0.45");
}

SimulatedFrame simulate_frame(const SimDatasetSpec& spec, const OfdmConfig& cfg, uint64_t seed,
                              double forced_snr_db) {
    Rng rng(seed);
    SimulatedFrame out;
    out.theta = rng.uniform(spec.theta_min, spec.theta_max);
    out.snr_db = std::isnan(forced_snr_db) ? rng.uniform(spec.snr_db_min, spec.snr_db_max)
                                           : forced_snr_db;
    out.bits = random_bits(cfg.bits_per_frame(), rng);

    DeviceProfile profile;
    profile.name = "sim";
    // lo_ppm equals theta with the carrier at 1e6 subcarrier spacings.
    profile.carrier_hz = cfg.subcarrier_spacing_hz() * 1e6;
    profile.lo_ppm = out.theta;
    profile.phase_noise_linewidth_hz = rng.uniform(spec.linewidth_min_hz, spec.linewidth_max_hz);
    profile.iq_gain = rng.uniform(spec.iq_gain_min, spec.iq_gain_max);
    profile.iq_phase_rad =
        rng.uniform(spec.iq_phase_min_deg, spec.iq_phase_max_deg) * M_PI / 180.0;
    profile.sfo_ppm = rng.uniform(spec.sfo_min_ppm, spec.sfo_max_ppm);

    ChannelTaps h = draw_random_channel(rng, spec.multipath_max_taps, spec.multipath_decay);
    std::vector<ComplexBuffer> frames{build_frame(out.bits, cfg)};
    RenderResult rendered =
        render_capture(frames, profile, h, NoiseSpec{out.snr_db}, cfg, rng);
    out.rx = std::move(rendered.capture);
    out.theta = rendered.true_theta.value;
    return out;
}

Dataset generate_labeled_set(const SimDatasetSpec& spec, const OfdmConfig& cfg, long count,
                             uint64_t stream) {
    spec.validate();
    cfg.validate();
    const long dim = static_cast<long>(cfg.cp_len) * cfg.num_symbols;
    Dataset set;
    set.n = count;
    set.dim = dim;
    set.features.resize(count * dim);
    set.labels.resize(count);
    for (long i = 0; i < count; ++i) {
        const uint64_t seed = derive_seed(spec.master_seed, stream + static_cast<uint64_t>(i));
        SimulatedFrame frame = simulate_frame(spec, cfg, seed);
        PhaseFeature f = cp_phase_features(frame.rx, cfg);
        std::copy(f.phi.begin(), f.phi.end(), set.features.begin() + i * dim);
        set.labels[i] = frame.theta;
    }
    return set;
}

PretrainData generate_pretrain_dataset(const SimDatasetSpec& spec, const OfdmConfig& cfg) {
    PretrainData data;
    data.train = generate_labeled_set(spec, cfg, spec.n_train, kTrainStream);
    data.val = generate_labeled_set(spec, cfg, spec.n_val, kValStream);
    return data;
}

PretrainResult pretrain(const SimDatasetSpec& spec, const OfdmConfig& cfg,
                        const TrainConfig& train_cfg) {
    PretrainData data = generate_pretrain_dataset(spec, cfg);
    FeatureStats stats = standardize_fit(data.train);

    CfoRegressor model(train_cfg.dropout_fc1, train_cfg.dropout_fc2);
    Rng init_rng(derive_seed(train_cfg.seed, 7));
    model.he_init(init_rng);

    PretrainResult out;
    out.history = train(model, data.train, data.val, stats, train_cfg, cfg);
    out.checkpoint = std::move(out.history.best);
    return out;
}

}  // namespace cfocal

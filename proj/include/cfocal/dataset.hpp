#pragma once

#include <cmath>

#include "cfocal/checkpoint.hpp"
#include "cfocal/estimators.hpp"
#include "cfocal/impairments.hpp"
#include "cfocal/standardize.hpp"
#include "cfocal/training.hpp"

namespace cfocal {

/// Randomization ranges for synthetic impaired-frame generation. Each item
/// draws CFO, SNR, multipath and receiver-fingerprint parameters uniformly
/// from these ranges, with per-item seeds derived from the master seed.
struct SimDatasetSpec {
    long n_train = 50000;
    long n_val = 5000;
    double snr_db_min = 0.0, snr_db_max = 30.0;
    double theta_min = -0.45, theta_max = 0.45;
    int multipath_max_taps = 8;
    double multipath_decay = 0.7;
    double linewidth_min_hz = 0.0, linewidth_max_hz = 500.0;
    double iq_gain_min = 1.0, iq_gain_max = 1.1;
    double iq_phase_min_deg = 0.0, iq_phase_max_deg = 5.0;
    double sfo_min_ppm = -20.0, sfo_max_ppm = 20.0;
    uint64_t master_seed = 1;

    void validate() const;
};

/// One impaired frame drawn from the spec's randomization.
struct SimulatedFrame {
    ComplexBuffer rx;
    double theta = 0.0;   // ground truth, subcarrier-spacing units
    double snr_db = 0.0;
    BitStream bits;
};

/// Deterministic in `seed`. Pass a finite `forced_snr_db` to pin the noise
/// level (held-out evaluation at fixed SNR points).
SimulatedFrame simulate_frame(const SimDatasetSpec& spec, const OfdmConfig& cfg, uint64_t seed,
                              double forced_snr_db = std::nan(""));

/// `count` labeled items (CP phase features, theta) on seed stream `stream`.
Dataset generate_labeled_set(const SimDatasetSpec& spec, const OfdmConfig& cfg, long count,
                             uint64_t stream);

struct PretrainData {
    Dataset train;
    Dataset val;
};

/// Training and validation splits on disjoint seed streams.
PretrainData generate_pretrain_dataset(const SimDatasetSpec& spec, const OfdmConfig& cfg);

struct PretrainResult {
    Checkpoint checkpoint;
    TrainResult history;
};

/// Dataset synthesis, feature standardization (training split only), model
/// initialization and the full training loop; returns the best checkpoint
/// with embedded feature statistics.
PretrainResult pretrain(const SimDatasetSpec& spec, const OfdmConfig& cfg,
                        const TrainConfig& train_cfg);

}  // namespace cfocal

#pragma once

#include <vector>

#include "cfocal/checkpoint.hpp"
#include "cfocal/model.hpp"
#include "cfocal/optimizer.hpp"
#include "cfocal/standardize.hpp"

namespace cfocal {

struct TrainConfig {
    double learning_rate = 1e-3;
    double l2_lambda = 1e-4;
    double clip_norm = 1.0;
    int batch_size = 128;
    int epochs = 15;
    double scheduler_factor = 0.5;
    int scheduler_patience = 5;
    double dropout_fc1 = 0.3;
    double dropout_fc2 = 0.25;
    uint64_t seed = 1;
    bool verbose = true;

    void validate() const;
};

struct TrainResult {
    Checkpoint best;
    std::vector<double> train_losses;  // per epoch, MSE + L2 term
    std::vector<double> val_losses;    // per epoch, plain MSE
    double best_val_loss = 0.0;
};

/// Epoch loop per the standard recipe: standardize batch inputs, forward,
/// MSE + L2 loss, backward, global-norm clip, AdamW step; per-epoch
/// validation with best-checkpoint retention and plateau LR scheduling.
/// Deterministic for a fixed config seed. Throws on empty datasets and
/// aborts with a diagnostic on non-finite loss.
TrainResult train(CfoRegressor& model, const Dataset& train_set, const Dataset& val_set,
                  const FeatureStats& stats, const TrainConfig& cfg, const OfdmConfig& ofdm);

/// Evaluation-mode predictions for raw (unstandardized) features, batched.
std::vector<double> predict(CfoRegressor& model, const std::vector<double>& features, long n,
                            long dim, const FeatureStats& stats, int batch_size = 256);

}  // namespace cfocal

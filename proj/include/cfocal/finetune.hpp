#pragma once

#include <vector>

#include "cfocal/capture.hpp"
#include "cfocal/checkpoint.hpp"

namespace cfocal {

struct FineTuneConfig {
    int epochs = 20;
    double learning_rate = 1e-4;
    int batch_size = 32;
    double clip_norm = 1.0;
    uint64_t seed = 1;
    bool verbose = true;

    void validate() const;
};

struct FineTuneResult {
    Checkpoint device_checkpoint;
    double initial_demod_loss = 0.0;  // eval-mode mean over all frames, before
    double final_demod_loss = 0.0;    // and after adaptation
    std::vector<double> epoch_losses;
};

/// Per-device adaptation on raw captures: frames are featurized and
/// standardized with the checkpoint's stored statistics, the convolutional
/// trunk runs frozen in evaluation mode (its pooled outputs are cached once),
/// and only the regression head is optimized against the demodulation
/// alignment loss — no CFO labels are consumed. Trunk parameters and
/// normalization buffers are bit-identical before and after.
FineTuneResult finetune(const Checkpoint& base, const std::vector<Capture>& captures,
                        const FineTuneConfig& cfg);

}  // namespace cfocal

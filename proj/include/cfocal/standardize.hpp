#pragma once

#include <cstdint>
#include <vector>

namespace cfocal {

/// Row-major feature matrix (n x dim) with per-item labels.
struct Dataset {
    std::vector<double> features;
    std::vector<double> labels;
    long n = 0;
    long dim = 0;

    const double* row(long i) const { return features.data() + i * dim; }
};

/// Per-position mean and standard deviation fitted on the training split
/// only. Values are float32-quantized so checkpoints store them losslessly.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Population statistics per position; standard deviations below 1e-8 are
/// clamped to the guard value (with a warning on stderr).
FeatureStats standardize_fit(const Dataset& train);

/// In-place (x - mean) / std over an n x dim row-major block.
void standardize_apply(double* features, long n, long dim, const FeatureStats& stats);

void standardize_apply(Dataset& set, const FeatureStats& stats);

}  // namespace cfocal

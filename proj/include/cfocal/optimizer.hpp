#pragma once

#include <limits>
#include <vector>

#include "cfocal/tensor.hpp"

namespace cfocal {

/// First/second-moment state, one entry per parameter in step order.
struct AdamState {
    std::vector<std::vector<double>> m, v;
    long t = 0;

    void init_for(const std::vector<Param*>& params);
    bool empty() const { return m.empty(); }
};

/// AdamW with bias correction (beta1 0.9, beta2 0.999, eps 1e-8). Decoupled
/// weight decay is zero: the L2 term lives in the loss, so applying decay
/// here as well would regularize twice. Updated values and moments are
/// float32-quantized to keep checkpoints lossless.
class AdamW {
public:
    explicit AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Param*>& params, AdamState& state, double lr) const;

private:
    double beta1_, beta2_, eps_;
};

/// Rescales the concatenated gradient vector to norm <= max_norm.
/// Returns the pre-clip norm.
double clip_grad_norm(const std::vector<Param*>& params, double max_norm);

/// Halves the learning rate after `patience` epochs without validation
/// improvement.
struct PlateauScheduler {
    double factor = 0.5;
    int patience = 5;

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    /// Updates lr in place; returns true when a reduction fired.
    bool step(double val_loss, double& lr);
};

}  // namespace cfocal

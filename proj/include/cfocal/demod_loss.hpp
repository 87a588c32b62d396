#pragma once

#include "cfocal/ofdm.hpp"

namespace cfocal {

struct DemodLossResult {
    double loss = 0.0;
    double dloss_dtheta = 0.0;
};

/// Label-free demodulation alignment loss for a CFO estimate: compensate the
/// frame by exp(-j*2*pi*theta_hat*n/K), remove CPs, DFT, form normalized
/// differential symbols, and take the mean squared complex distance to the
/// ideal constellation points implied by the transmitted bits.
///
/// The compensation stage is the only theta-dependent operation, so the
/// derivative propagates in closed form through the DFT and the
/// normalization; both the loss and d(loss)/d(theta_hat) are exact.
DemodLossResult differentiable_demod_loss(const ComplexBuffer& frame, double theta_hat,
                                          const BitStream& tx_bits, const OfdmConfig& cfg);

}  // namespace cfocal

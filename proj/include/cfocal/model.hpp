#pragma once

#include <memory>
#include <vector>

#include "cfocal/layers.hpp"

namespace cfocal {

/// CFO regression network over CP phase sequences.
///
/// Trunk: conv(1->64,k7,p3) BN GELU | conv(64->128,k5,s2,p2) BN GELU |
///        dw(128,k3,p1) pw(128->256) BN GELU | dw(256,k3,p1) pw(256->512)
///        BN GELU | global average pool -> 512.
/// Head:  fc 512->256 GELU dropout | fc 256->128 SiLU dropout | fc 128->1.
///
/// Trunk parameters (including normalization) form the conv-group that stays
/// frozen during per-device adaptation; the head is the fc-group.
class CfoRegressor {
public:
    explicit CfoRegressor(double dropout_fc1 = 0.3, double dropout_fc2 = 0.25);

    /// x: B x 1 x L standardized phase features; returns B x 1 estimates.
    Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng = nullptr);
    /// Pooled trunk output (B x 512) in eval mode; pure in the parameters.
    Tensor trunk_features(const Tensor& x);
    /// Head-only forward from pooled features, for adaptation with a frozen trunk.
    Tensor forward_head(const Tensor& pooled, Mode mode, Rng* dropout_rng = nullptr);

    /// Propagates loss gradients into every parameter.
    void backward(const Tensor& dloss_dout);
    /// Propagates through the head only; trunk gradients stay untouched.
    void backward_head(const Tensor& dloss_dout);

    void zero_grad();

    std::vector<Param*> params();
    std::vector<Param*> trunk_params();  // conv-group
    std::vector<Param*> head_params();   // fc-group
    std::vector<std::vector<double>*> buffers();

    /// He normal (fan-out) for weights, biases 0.1; values float32-quantized.
    void he_init(Rng& rng);

    uint64_t arch_hash() const;
    long param_count(bool conv_group) const;

private:
    std::vector<std::unique_ptr<Layer>> trunk_;
    std::vector<std::unique_ptr<Layer>> head_;
};

/// He init for an arbitrary parameter list (weights N(0, 2/fan_out),
/// biases 0.1); exposed for layer-level tests.
void he_init_params(const std::vector<Param*>& params, Rng& rng);

/// Mean squared error plus l2 * sum of squared weight (not bias, not
/// normalization) parameters.
double loss_mse_l2(const Tensor& pred, const std::vector<double>& target,
                   const std::vector<Param*>& params, double l2_lambda);

uint64_t fnv1a(const std::string& s);

}  // namespace cfocal

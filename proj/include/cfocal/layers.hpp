#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cfocal/rng.hpp"
#include "cfocal/tensor.hpp"

namespace cfocal {

enum class Mode { kTrain, kEval };

struct LayerContext {
    Mode mode = Mode::kEval;
    Rng* dropout_rng = nullptr;
};

/// Reshapes t, reallocating only when the element count changes; contents are
/// unspecified when the buffer is reused (layers overwrite them fully).
inline void ensure_shape(Tensor& t, std::vector<long> shape) {
    const size_t n = static_cast<size_t>(numel(shape));
    t.shape = std::move(shape);
    if (t.data.size() != n) t.data.assign(n, 0.0);
}

/// Layers own their output and gradient buffers and return references to
/// them, so steady-state batches run allocation-free. forward() keeps a
/// pointer to its input for the backward pass: the input tensor must stay
/// alive (and unmodified) until backward() has run, which the sequential
/// model chain guarantees.
class Layer {
public:
    virtual ~Layer() = default;
    /// Stable architecture signature; hashed into checkpoints.
    virtual std::string describe() const = 0;
    virtual const Tensor& forward(const Tensor& x, const LayerContext& ctx) = 0;
    /// Consumes the state cached by the preceding forward call.
    virtual const Tensor& backward(const Tensor& dy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    /// Non-learnable persistent state (running statistics).
    virtual std::vector<std::vector<double>*> buffers() { return {}; }
};

/// 1D cross-correlation over B x C x L inputs. Depthwise instances
/// (groups == in_ch == out_ch) and pointwise 1x1 convolutions take direct
/// paths; other shapes go through per-item column matrices + GEMM.
class Conv1d : public Layer {
public:
    Conv1d(int in_ch, int out_ch, int kernel, int stride, int padding, int groups,
           bool conv_group = true);
    std::string describe() const override;
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

    int out_len(int in_len) const;

private:
    int in_ch_, out_ch_, kernel_, stride_, padding_, groups_;
    Param weight_, bias_;
    const Tensor* cached_x_ = nullptr;
    std::vector<double> cols_;  // forward column matrices, reused by backward
    Tensor out_, dx_;
};

/// Per-channel normalization over batch x length in training mode
/// (eps 1e-5, running-stat momentum 0.1); running statistics in eval mode.
class BatchNorm1d : public Layer {
public:
    explicit BatchNorm1d(int channels, bool conv_group = true);
    std::string describe() const override;
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::vector<double>*> buffers() override {
        return {&running_mean_, &running_var_};
    }

private:
    int channels_;
    Param gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
    // training-pass cache
    Tensor cached_xhat_;
    std::vector<double> cached_inv_std_;
    std::vector<double> scratch_a_, scratch_b_;
    Mode cached_mode_ = Mode::kEval;
    Tensor out_, dx_;
};

enum class Act { kGelu, kSilu };

/// GELU via the exact Gaussian CDF; SiLU = x*sigmoid(x). Derivatives are
/// cached during the forward pass.
class Activation : public Layer {
public:
    explicit Activation(Act kind) : kind_(kind) {}
    std::string describe() const override;
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;

    static double eval(Act kind, double x);
    static double derivative(Act kind, double x);

private:
    Act kind_;
    std::vector<double> cached_deriv_;
    Tensor out_, dx_;
};

/// B x C x T -> B x C per-channel mean over time.
class AdaptiveAvgPool1d : public Layer {
public:
    std::string describe() const override { return "gap"; }
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;

private:
    long cached_T_ = 0, cached_B_ = 0, cached_C_ = 0;
    Tensor out_, dx_;
};

class Linear : public Layer {
public:
    Linear(int in_features, int out_features, bool conv_group = false);
    std::string describe() const override;
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    int in_features_, out_features_;
    Param weight_, bias_;
    const Tensor* cached_x_ = nullptr;
    Tensor out_, dx_;
};

/// Zeroes activations with probability p and scales survivors by 1/(1-p) in
/// training mode; identity in eval mode.
class Dropout : public Layer {
public:
    explicit Dropout(double p);
    std::string describe() const override;
    const Tensor& forward(const Tensor& x, const LayerContext& ctx) override;
    const Tensor& backward(const Tensor& dy) override;

private:
    double p_;
    std::vector<double> mask_;
    Mode cached_mode_ = Mode::kEval;
    Tensor out_, dx_;
};

}  // namespace cfocal

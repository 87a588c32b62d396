#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace cfocal {

/// Rounds through float32. All learnable state is kept float32-valued so the
/// 32-bit checkpoint format stores it losslessly and reloads bit-exactly.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline long numel(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
}

/// Dense row-major value holder with an optional gradient of the same shape.
struct Tensor {
    std::vector<long> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless a backward pass filled it

    Tensor() = default;
    explicit Tensor(std::vector<long> s) : shape(std::move(s)), data(numel(shape), 0.0) {}

    long size() const { return static_cast<long>(data.size()); }
    long dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool has_grad() const { return !grad.empty(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

/// A learnable array. `is_weight` marks multiplicative parameters that get
/// He initialization and L2 regularization; biases and normalization
/// parameters are excluded. `conv_group` separates the frozen trunk from the
/// fine-tunable head.
struct Param {
    std::string name;
    std::vector<long> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool is_weight = false;
    bool conv_group = true;
    long fan_out = 0;  // He initialization scale for weights

    long size() const { return static_cast<long>(value.size()); }
    void zero_grad() { grad.assign(value.size(), 0.0); }
};

}  // namespace cfocal

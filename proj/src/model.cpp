#include "cfocal/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cfocal {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

CfoRegressor::CfoRegressor(double dropout_fc1, double dropout_fc2) {
    trunk_.push_back(std::make_unique<Conv1d>(1, 64, 7, 1, 3, 1));
    trunk_.push_back(std::make_unique<BatchNorm1d>(64));
    trunk_.push_back(std::make_unique<Activation>(Act::kGelu));
    trunk_.push_back(std::make_unique<Conv1d>(64, 128, 5, 2, 2, 1));
    trunk_.push_back(std::make_unique<BatchNorm1d>(128));
    trunk_.push_back(std::make_unique<Activation>(Act::kGelu));
    trunk_.push_back(std::make_unique<Conv1d>(128, 128, 3, 1, 1, 128));  // depthwise
    trunk_.push_back(std::make_unique<Conv1d>(128, 256, 1, 1, 0, 1));    // pointwise
    trunk_.push_back(std::make_unique<BatchNorm1d>(256));
    trunk_.push_back(std::make_unique<Activation>(Act::kGelu));
    trunk_.push_back(std::make_unique<Conv1d>(256, 256, 3, 1, 1, 256));  // depthwise
    trunk_.push_back(std::make_unique<Conv1d>(256, 512, 1, 1, 0, 1));    // pointwise
    trunk_.push_back(std::make_unique<BatchNorm1d>(512));
    trunk_.push_back(std::make_unique<Activation>(Act::kGelu));
    trunk_.push_back(std::make_unique<AdaptiveAvgPool1d>());

    head_.push_back(std::make_unique<Linear>(512, 256, /*conv_group=*/false));
    head_.push_back(std::make_unique<Activation>(Act::kGelu));
    head_.push_back(std::make_unique<Dropout>(dropout_fc1));
    head_.push_back(std::make_unique<Linear>(256, 128, /*conv_group=*/false));
    head_.push_back(std::make_unique<Activation>(Act::kSilu));
    head_.push_back(std::make_unique<Dropout>(dropout_fc2));
    head_.push_back(std::make_unique<Linear>(128, 1, /*conv_group=*/false));
}

Tensor CfoRegressor::forward(const Tensor& x, Mode mode, Rng* dropout_rng) {
    LayerContext ctx{mode, dropout_rng};
    const Tensor* cur = &x;
    for (auto& l : trunk_) cur = &l->forward(*cur, ctx);
    for (auto& l : head_) cur = &l->forward(*cur, ctx);
    return *cur;
}

Tensor CfoRegressor::trunk_features(const Tensor& x) {
    LayerContext ctx{Mode::kEval, nullptr};
    const Tensor* cur = &x;
    for (auto& l : trunk_) cur = &l->forward(*cur, ctx);
    return *cur;
}

Tensor CfoRegressor::forward_head(const Tensor& pooled, Mode mode, Rng* dropout_rng) {
    LayerContext ctx{mode, dropout_rng};
    const Tensor* cur = &pooled;
    for (auto& l : head_) cur = &l->forward(*cur, ctx);
    return *cur;
}

void CfoRegressor::backward(const Tensor& dloss_dout) {
    const Tensor* cur = &dloss_dout;
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) cur = &(*it)->backward(*cur);
    for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) cur = &(*it)->backward(*cur);
}

void CfoRegressor::backward_head(const Tensor& dloss_dout) {
    const Tensor* cur = &dloss_dout;
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) cur = &(*it)->backward(*cur);
}

void CfoRegressor::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

std::vector<Param*> CfoRegressor::params() {
    std::vector<Param*> out = trunk_params();
    auto head = head_params();
    out.insert(out.end(), head.begin(), head.end());
    return out;
}

std::vector<Param*> CfoRegressor::trunk_params() {
    std::vector<Param*> out;
    for (auto& l : trunk_)
        for (Param* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Param*> CfoRegressor::head_params() {
    std::vector<Param*> out;
    for (auto& l : head_)
        for (Param* p : l->params()) out.push_back(p);
    return out;
}

std::vector<std::vector<double>*> CfoRegressor::buffers() {
    std::vector<std::vector<double>*> out;
    for (auto& l : trunk_)
        for (auto* b : l->buffers()) out.push_back(b);
    for (auto& l : head_)
        for (auto* b : l->buffers()) out.push_back(b);
    return out;
}

void he_init_params(const std::vector<Param*>& params, Rng& rng) {
    for (Param* p : params) {
        if (p->is_weight) {
            const double stddev = std::sqrt(2.0 / static_cast<double>(p->fan_out));
            for (auto& v : p->value) v = to_f32(stddev * rng.gaussian());
        } else if (p->name.find(".gamma") != std::string::npos) {
            for (auto& v : p->value) v = 1.0;
        } else {
            // biases, including normalization shifts
            for (auto& v : p->value) v = to_f32(0.1);
        }
    }
}

void CfoRegressor::he_init(Rng& rng) { he_init_params(params(), rng); }

uint64_t CfoRegressor::arch_hash() const {
    std::string desc;
    for (const auto& l : trunk_) desc += l->describe() + "|";
    for (const auto& l : head_) desc += l->describe() + "|";
    return fnv1a(desc);
}

long CfoRegressor::param_count(bool conv_group) const {
    long n = 0;
    auto* self = const_cast<CfoRegressor*>(this);
    for (Param* p : self->params())
        if (p->conv_group == conv_group) n += p->size();
    return n;
}

double loss_mse_l2(const Tensor& pred, const std::vector<double>& target,
                   const std::vector<Param*>& params, double l2_lambda) {
    if (pred.data.size() != target.size())
        throw std::invalid_argument("loss_mse_l2: prediction/target shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        const double d = pred.data[i] - target[i];
        mse += d * d;
    }
    mse /= static_cast<double>(target.size());
    double reg = 0.0;
    if (l2_lambda != 0.0) {
        for (const Param* p : params) {
            if (!p->is_weight) continue;
            for (double v : p->value) reg += v * v;
        }
    }
    return mse + l2_lambda * reg;
}

}  // namespace cfocal

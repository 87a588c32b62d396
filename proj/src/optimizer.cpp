#include "cfocal/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cfocal {

void AdamState::init_for(const std::vector<Param*>& params) {
    m.clear();
    v.clear();
    for (const Param* p : params) {
        m.emplace_back(p->value.size(), 0.0);
        v.emplace_back(p->value.size(), 0.0);
    }
    t = 0;
}

void AdamW::step(const std::vector<Param*>& params, AdamState& state, double lr) const {
    if (state.empty()) state.init_for(params);
    if (state.m.size() != params.size())
        throw std::invalid_argument("AdamW: state does not match parameter list");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (p.grad.size() != p.value.size())
            throw std::invalid_argument("AdamW: parameter " + p.name + " has no gradient");
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = to_f32(beta1_ * m[j] + (1.0 - beta1_) * g);
            v[j] = to_f32(beta2_ * v[j] + (1.0 - beta2_) * g * g);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p.value[j] = to_f32(p.value[j] - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
    double sq = 0.0;
    for (const Param* p : params)
        for (double g : p->grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (Param* p : params)
            for (double& g : p->grad) g *= scale;
    }
    return norm;
}

bool PlateauScheduler::step(double val_loss, double& lr) {
    if (val_loss < best) {
        best = val_loss;
        stale = 0;
        return false;
    }
    if (++stale > patience) {
        lr *= factor;
        stale = 0;
        return true;
    }
    return false;
}

}  // namespace cfocal

#include "cfocal/finetune.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "cfocal/demod_loss.hpp"
#include "cfocal/estimators.hpp"

namespace cfocal {

namespace {

struct FrameItem {
    ComplexBuffer rx;
    BitStream bits;
    std::vector<double> features;  // standardized
};

void shuffle_indices(std::vector<long>& idx, Rng& rng) {
    for (long i = static_cast<long>(idx.size()) - 1; i > 0; --i) {
        const long j = rng.uniform_int(0, static_cast<int>(i));
        std::swap(idx[i], idx[j]);
    }
}

}  // namespace

void FineTuneConfig::validate() const {
    if (epochs < 1 || learning_rate <= 0 || batch_size < 1 || clip_norm <= 0)
        throw std::invalid_argument("FineTuneConfig: non-positive field");
}

FineTuneResult finetune(const Checkpoint& base, const std::vector<Capture>& captures,
                        const FineTuneConfig& cfg) {
    cfg.validate();
    if (captures.empty()) throw std::invalid_argument("finetune: empty capture set");
    const OfdmConfig ofdm = base.ofdm;
    for (const Capture& cap : captures)
        if (!(cap.meta.ofdm() == ofdm))
            throw std::invalid_argument("finetune: capture frame config does not match checkpoint");

    CfoRegressor model;
    restore_model(model, base);

    // Slice captures into frames and featurize with the stored statistics.
    const long dim = static_cast<long>(ofdm.cp_len) * ofdm.num_symbols;
    const long frame_len = ofdm.frame_len();
    const long bits_per_frame = ofdm.bits_per_frame();
    std::vector<FrameItem> items;
    for (const Capture& cap : captures) {
        for (int i = 0; i < cap.meta.n_frames; ++i) {
            FrameItem item;
            item.rx.assign(cap.samples.begin() + static_cast<long>(i) * frame_len,
                           cap.samples.begin() + static_cast<long>(i + 1) * frame_len);
            item.bits.assign(cap.bits.begin() + static_cast<long>(i) * bits_per_frame,
                             cap.bits.begin() + static_cast<long>(i + 1) * bits_per_frame);
            PhaseFeature f = cp_phase_features(item.rx, ofdm);
            item.features = std::move(f.phi);
            standardize_apply(item.features.data(), 1, dim, base.stats);
            items.push_back(std::move(item));
        }
    }
    const long n = static_cast<long>(items.size());

    // The frozen trunk is a pure function of its inputs in eval mode, so its
    // pooled features are computed once and reused every epoch.
    Tensor pooled({n, 512});
    {
        constexpr long kChunk = 256;
        for (long start = 0; start < n; start += kChunk) {
            const long count = std::min(kChunk, n - start);
            Tensor x({count, 1, dim});
            for (long i = 0; i < count; ++i)
                std::copy(items[start + i].features.begin(), items[start + i].features.end(),
                          x.data.begin() + i * dim);
            Tensor fg = model.trunk_features(x);
            std::copy(fg.data.begin(), fg.data.end(), pooled.data.begin() + start * 512);
        }
    }

    auto mean_demod_loss = [&](const std::vector<double>& thetas) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i)
            acc += differentiable_demod_loss(items[i].rx, thetas[i], items[i].bits, ofdm).loss;
        return acc / static_cast<double>(n);
    };
    auto predict_all = [&] {
        std::vector<double> thetas(n);
        constexpr long kChunk = 1024;
        for (long start = 0; start < n; start += kChunk) {
            const long count = std::min(kChunk, n - start);
            Tensor fg({count, 512});
            std::copy(pooled.data.begin() + start * 512, pooled.data.begin() + (start + count) * 512,
                      fg.data.begin());
            Tensor pred = model.forward_head(fg, Mode::kEval);
            for (long i = 0; i < count; ++i) thetas[start + i] = pred.data[i];
        }
        return thetas;
    };

    FineTuneResult result;
    result.initial_demod_loss = mean_demod_loss(predict_all());

    auto head = model.head_params();
    AdamW opt;
    AdamState state;
    state.init_for(head);
    Rng shuffle_rng(derive_seed(cfg.seed, 11));
    Rng dropout_rng(derive_seed(cfg.seed, 22));
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        long batches = 0;
        for (long start = 0; start < n; start += cfg.batch_size) {
            const long count = std::min<long>(cfg.batch_size, n - start);
            Tensor fg({count, 512});
            for (long i = 0; i < count; ++i)
                std::copy(pooled.data.begin() + order[start + i] * 512,
                          pooled.data.begin() + (order[start + i] + 1) * 512,
                          fg.data.begin() + i * 512);
            Tensor pred = model.forward_head(fg, Mode::kTrain, &dropout_rng);

            Tensor dout({count, 1});
            double batch_loss = 0.0;
            for (long i = 0; i < count; ++i) {
                const FrameItem& item = items[order[start + i]];
                DemodLossResult dl =
                    differentiable_demod_loss(item.rx, pred.data[i], item.bits, ofdm);
                batch_loss += dl.loss;
                dout.data[i] = dl.dloss_dtheta / static_cast<double>(count);
            }
            batch_loss /= static_cast<double>(count);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("finetune: non-finite demodulation loss");
            epoch_loss += batch_loss;
            ++batches;

            for (Param* p : head) p->zero_grad();
            model.backward_head(dout);
            clip_grad_norm(head, cfg.clip_norm);
            opt.step(head, state, cfg.learning_rate);
        }
        epoch_loss /= static_cast<double>(std::max<long>(batches, 1));
        result.epoch_losses.push_back(epoch_loss);
        if (cfg.verbose) {
            std::printf("finetune epoch %2d  demod loss %.6e\n", epoch + 1, epoch_loss);
            std::fflush(stdout);
        }
    }

    result.final_demod_loss = mean_demod_loss(predict_all());

    // Device checkpoint: untouched trunk, adapted head, head optimizer
    // moments in their parameter slots.
    auto all_params = model.params();
    AdamState full_state;
    full_state.init_for(all_params);
    full_state.t = state.t;
    size_t head_idx = 0;
    for (size_t i = 0; i < all_params.size(); ++i) {
        if (all_params[i]->conv_group) continue;
        full_state.m[i] = state.m[head_idx];
        full_state.v[i] = state.v[head_idx];
        ++head_idx;
    }
    result.device_checkpoint =
        snapshot_model(model, full_state, base.stats, ofdm, result.final_demod_loss);
    return result;
}

}  // namespace cfocal

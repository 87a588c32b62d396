#include "cfocal/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace cfocal {

namespace {

Tensor assemble_batch(const Dataset& set, const std::vector<long>& order, long start, long count,
                      const FeatureStats& stats, std::vector<double>& targets) {
    const long dim = set.dim;
    Tensor x({count, 1, dim});
    targets.resize(count);
    for (long i = 0; i < count; ++i) {
        const long idx = order[start + i];
        const double* src = set.row(idx);
        double* dst = x.data.data() + i * dim;
        for (long d = 0; d < dim; ++d) dst[d] = (src[d] - stats.mean[d]) / stats.stddev[d];
        targets[i] = set.labels[idx];
    }
    return x;
}

// Fisher-Yates on an explicit RNG, independent of std::shuffle internals.
void shuffle_indices(std::vector<long>& idx, Rng& rng) {
    for (long i = static_cast<long>(idx.size()) - 1; i > 0; --i) {
        const long j = rng.uniform_int(0, static_cast<int>(i));
        std::swap(idx[i], idx[j]);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0 || l2_lambda < 0 || clip_norm <= 0 || batch_size < 2 || epochs < 1 ||
        scheduler_factor <= 0 || scheduler_patience < 1)
        throw std::invalid_argument("TrainConfig: non-positive field");
    for (double p : {dropout_fc1, dropout_fc2})
        if (p < 0.25 || p > 0.4)
            throw std::invalid_argument("TrainConfig: dropout rates must lie in [0.25, 0.4]");
}

TrainResult train(CfoRegressor& model, const Dataset& train_set, const Dataset& val_set,
                  const FeatureStats& stats, const TrainConfig& cfg, const OfdmConfig& ofdm) {
    cfg.validate();
    if (train_set.n < 1 || val_set.n < 1) throw std::invalid_argument("train: empty dataset");

    auto params = model.params();
    AdamW opt;
    AdamState state;
    state.init_for(params);
    PlateauScheduler sched{cfg.scheduler_factor, cfg.scheduler_patience};
    double lr = cfg.learning_rate;

    Rng shuffle_rng(derive_seed(cfg.seed, 101));
    Rng dropout_rng(derive_seed(cfg.seed, 202));

    std::vector<long> order(train_set.n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        long batches = 0;
        std::vector<double> targets;
        for (long start = 0; start < train_set.n; start += cfg.batch_size) {
            const long count = std::min<long>(cfg.batch_size, train_set.n - start);
            if (count < 2) continue;  // batch-norm needs at least two samples
            Tensor x = assemble_batch(train_set, order, start, count, stats, targets);
            Tensor pred = model.forward(x, Mode::kTrain, &dropout_rng);
            const double loss = loss_mse_l2(pred, targets, params, cfg.l2_lambda);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            epoch_loss += loss;
            ++batches;

            Tensor dout({count, 1});
            for (long i = 0; i < count; ++i)
                dout.data[i] = 2.0 * (pred.data[i] - targets[i]) / static_cast<double>(count);
            model.zero_grad();
            model.backward(dout);
            if (cfg.l2_lambda != 0.0) {
                for (Param* p : params) {
                    if (!p->is_weight) continue;
                    for (size_t j = 0; j < p->value.size(); ++j)
                        p->grad[j] += 2.0 * cfg.l2_lambda * p->value[j];
                }
            }
            clip_grad_norm(params, cfg.clip_norm);
            opt.step(params, state, lr);
        }
        epoch_loss /= static_cast<double>(std::max<long>(batches, 1));
        result.train_losses.push_back(epoch_loss);

        auto val_pred =
            predict(model, val_set.features, val_set.n, val_set.dim, stats, cfg.batch_size);
        double val_mse = 0.0;
        for (long i = 0; i < val_set.n; ++i) {
            const double d = val_pred[i] - val_set.labels[i];
            val_mse += d * d;
        }
        val_mse /= static_cast<double>(val_set.n);
        result.val_losses.push_back(val_mse);

        if (val_mse < result.best_val_loss) {
            result.best_val_loss = val_mse;
            result.best = snapshot_model(model, state, stats, ofdm, val_mse);
        }
        sched.step(val_mse, lr);

        if (cfg.verbose) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("epoch %3d  train %.6e  val %.6e  lr %.2e  (%.1fs)\n", epoch + 1,
                        epoch_loss, val_mse, lr, secs);
            std::fflush(stdout);
        }
    }
    return result;
}

std::vector<double> predict(CfoRegressor& model, const std::vector<double>& features, long n,
                            long dim, const FeatureStats& stats, int batch_size) {
    std::vector<double> out(n);
    for (long start = 0; start < n; start += batch_size) {
        const long count = std::min<long>(batch_size, n - start);
        Tensor x({count, 1, dim});
        for (long i = 0; i < count; ++i) {
            const double* src = features.data() + (start + i) * dim;
            double* dst = x.data.data() + i * dim;
            for (long d = 0; d < dim; ++d) dst[d] = (src[d] - stats.mean[d]) / stats.stddev[d];
        }
        Tensor pred = model.forward(x, Mode::kEval, nullptr);
        for (long i = 0; i < count; ++i) out[start + i] = pred.data[i];
    }
    return out;
}

}  // namespace cfocal

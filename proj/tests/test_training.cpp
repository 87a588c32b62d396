#include <cmath>

#include "cfocal/model.hpp"
#include "cfocal/optimizer.hpp"
#include "cfocal/training.hpp"
#include "doctest.h"

using namespace cfocal;

namespace {

// Linear synthetic regression: label = fixed projection of the features.
Dataset linear_task(long n, long dim, uint64_t seed) {
    Dataset set;
    set.n = n;
    set.dim = dim;
    set.features.resize(n * dim);
    set.labels.resize(n);
    Rng rng(seed);
    std::vector<double> w(dim);
    Rng wrng(999);
    for (auto& v : w) v = wrng.uniform(-1.0, 1.0) / std::sqrt(static_cast<double>(dim));
    for (long i = 0; i < n; ++i) {
        double acc = 0;
        for (long d = 0; d < dim; ++d) {
            const double x = rng.gaussian();
            set.features[i * dim + d] = x;
            acc += w[d] * x;
        }
        set.labels[i] = std::tanh(acc);  // keep labels in a CFO-like range
    }
    return set;
}

}  // namespace

TEST_CASE("adamw: zero gradients leave parameters unchanged") {
    Param p{"w", {4}, {1.0, -2.0, 3.0, 0.5}, {0.0, 0.0, 0.0, 0.0}, true, false, 4};
    auto before = p.value;
    AdamW opt;
    AdamState state;
    std::vector<Param*> params = {&p};
    state.init_for(params);
    for (int i = 0; i < 10; ++i) opt.step(params, state, 1e-3);
    CHECK(p.value == before);
}

TEST_CASE("adamw: single-parameter quadratic converges") {
    Param p{"w", {1}, {0.0}, {0.0}, true, false, 1};
    std::vector<Param*> params = {&p};
    AdamW opt;
    AdamState state;
    state.init_for(params);
    double loss = 0;
    for (int i = 0; i < 500; ++i) {
        loss = (p.value[0] - 3.0) * (p.value[0] - 3.0);
        p.grad[0] = 2.0 * (p.value[0] - 3.0);
        opt.step(params, state, 0.1);
    }
    CHECK(loss < 1e-6);
}

TEST_CASE("clip_grad_norm: rescales exactly and bounds the result") {
    Param a{"a", {2}, {0.0, 0.0}, {1.2, 0.9}, true, false, 2};
    Param b{"b", {1}, {0.0}, {1.1}, false, false, 0};
    std::vector<Param*> params = {&a, &b};
    // norm of (1.2, 0.9, 1.1) is sqrt(3.46) ~ 1.86
    const double pre = clip_grad_norm(params, 1.0);
    CHECK(pre == doctest::Approx(std::sqrt(1.2 * 1.2 + 0.9 * 0.9 + 1.1 * 1.1)));
    double post_sq = 0;
    for (Param* p : params)
        for (double g : p->grad) post_sq += g * g;
    CHECK(std::sqrt(post_sq) <= 1.0 + 1e-9);

    Param c{"c", {1}, {0.0}, {2.0}, true, false, 1};
    std::vector<Param*> single = {&c};
    clip_grad_norm(single, 1.0);
    CHECK(c.grad[0] == doctest::Approx(1.0));  // norm 2 scaled by exactly 0.5
}

TEST_CASE("plateau scheduler: halves lr after patience epochs without improvement") {
    PlateauScheduler sched{0.5, 5};
    double lr = 1e-3;
    CHECK_FALSE(sched.step(1.0, lr));   // first value becomes best
    CHECK_FALSE(sched.step(0.9, lr));   // improvement
    for (int i = 0; i < 5; ++i) CHECK_FALSE(sched.step(0.95, lr));
    CHECK(sched.step(0.95, lr));        // sixth stale epoch fires
    CHECK(lr == doctest::Approx(5e-4));
}

TEST_CASE("train: linear synthetic task reaches a tenth of the initial loss") {
    Dataset train_set = linear_task(500, 64, 1);
    Dataset val_set = linear_task(128, 64, 2);
    FeatureStats stats = standardize_fit(train_set);

    CfoRegressor model;
    Rng rng(3);
    model.he_init(rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 64;
    cfg.seed = 4;
    cfg.verbose = false;
    TrainResult res = train(model, train_set, val_set, stats, cfg, OfdmConfig{});
    REQUIRE(res.train_losses.size() == 20);
    CHECK(res.train_losses.back() < 0.1 * res.train_losses.front());
}

TEST_CASE("train: best checkpoint dominates every epoch's validation loss") {
    Dataset train_set = linear_task(200, 48, 5);
    Dataset val_set = linear_task(64, 48, 6);
    FeatureStats stats = standardize_fit(train_set);
    CfoRegressor model;
    Rng rng(7);
    model.he_init(rng);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 32;
    cfg.seed = 8;
    cfg.verbose = false;
    TrainResult res = train(model, train_set, val_set, stats, cfg, OfdmConfig{});
    for (double v : res.val_losses) CHECK(res.best_val_loss <= v);
    CHECK(res.best.best_val_loss == doctest::Approx(res.best_val_loss));
}

TEST_CASE("train: identical seeds give identical loss trajectories") {
    Dataset train_set = linear_task(200, 48, 9);
    Dataset val_set = linear_task(64, 48, 10);
    FeatureStats stats = standardize_fit(train_set);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.seed = 11;
    cfg.verbose = false;

    CfoRegressor m1;
    Rng r1(12);
    m1.he_init(r1);
    TrainResult a = train(m1, train_set, val_set, stats, cfg, OfdmConfig{});

    CfoRegressor m2;
    Rng r2(12);
    m2.he_init(r2);
    TrainResult b = train(m2, train_set, val_set, stats, cfg, OfdmConfig{});

    CHECK(a.train_losses == b.train_losses);
    CHECK(a.val_losses == b.val_losses);
    CHECK(a.best.params == b.best.params);
}

TEST_CASE("train: empty dataset and non-finite loss abort with diagnostics") {
    Dataset empty;
    Dataset ok = linear_task(64, 16, 13);
    FeatureStats stats = standardize_fit(ok);
    CfoRegressor model;
    Rng rng(14);
    model.he_init(rng);
    TrainConfig cfg;
    cfg.verbose = false;
    CHECK_THROWS_AS(train(model, empty, ok, stats, cfg, OfdmConfig{}), std::invalid_argument);

    Dataset bad = ok;
    bad.labels[0] = std::numeric_limits<double>::infinity();
    cfg.epochs = 1;
    cfg.batch_size = 64;
    CHECK_THROWS_AS(train(model, bad, ok, stats, cfg, OfdmConfig{}), std::runtime_error);
}

TEST_CASE("train config: dropout band and positivity enforced") {
    TrainConfig cfg;
    cfg.dropout_fc1 = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("standardize: two-point example and affine behaviour") {
    Dataset set;
    set.n = 2;
    set.dim = 1;
    set.features = {0.0, 2.0};
    set.labels = {0, 0};
    FeatureStats st = standardize_fit(set);
    CHECK(st.mean[0] == doctest::Approx(1.0));
    CHECK(st.stddev[0] == doctest::Approx(1.0));
    standardize_apply(set, st);
    CHECK(set.features[0] == doctest::Approx(-1.0));
    CHECK(set.features[1] == doctest::Approx(1.0));
}

TEST_CASE("standardize: transformed training set is centered and scaled") {
    Dataset set = linear_task(400, 32, 15);
    FeatureStats st = standardize_fit(set);
    Dataset copy = set;
    standardize_apply(copy, st);
    for (long d = 0; d < copy.dim; ++d) {
        double mean = 0, sq = 0;
        for (long i = 0; i < copy.n; ++i) {
            const double v = copy.features[i * copy.dim + d];
            mean += v;
            sq += v * v;
        }
        mean /= copy.n;
        const double stddev = std::sqrt(sq / copy.n - mean * mean);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(stddev - 1.0) < 1e-4);
    }
}

TEST_CASE("standardize: refitting on a different split changes the stats") {
    Dataset train_split = linear_task(300, 16, 16);
    Dataset val_split = linear_task(300, 16, 17);
    for (auto& v : val_split.features) v = v * 1.7 + 0.3;  // shifted domain
    FeatureStats from_train = standardize_fit(train_split);
    FeatureStats from_val = standardize_fit(val_split);
    bool any_different = false;
    for (size_t d = 0; d < from_train.mean.size(); ++d)
        if (from_train.mean[d] != from_val.mean[d]) any_different = true;
    CHECK(any_different);  // negative control: validation must not be refit
}

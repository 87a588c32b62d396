#include <cmath>
#include <cstdio>

#include "cfocal/checkpoint.hpp"
#include "cfocal/model.hpp"
#include "cfocal/optimizer.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cfocal;
using namespace cfocal::testing;

namespace {

Tensor random_input(long B, long L, uint64_t seed) {
    Tensor x({B, 1, L});
    Rng rng(seed);
    for (auto& v : x.data) v = rng.gaussian();
    return x;
}

}  // namespace

TEST_CASE("model: output shape contract") {
    CfoRegressor model;
    Rng rng(1);
    model.he_init(rng);
    Tensor x = random_input(8, 320, 2);
    Tensor y = model.forward(x, Mode::kEval);
    CHECK(y.shape == std::vector<long>({8, 1}));
}

TEST_CASE("model: evaluation forward is bit-deterministic") {
    CfoRegressor model;
    Rng rng(3);
    model.he_init(rng);
    Tensor x = random_input(4, 320, 4);
    Tensor a = model.forward(x, Mode::kEval);
    Tensor b = model.forward(x, Mode::kEval);
    CHECK(a.data == b.data);
}

TEST_CASE("model: parameter group split matches the head/trunk boundary") {
    CfoRegressor model;
    auto head = model.head_params();
    REQUIRE(head.size() == 6);  // three linear layers, weight + bias each
    for (const Param* p : head) CHECK_FALSE(p->conv_group);
    for (const Param* p : model.trunk_params()) CHECK(p->conv_group);

    CHECK(model.param_count(false) == 164353);
    CHECK(model.param_count(true) == 209664);
    // Head share of the total, reported for the adaptation-cost discussion.
    std::printf("params: conv-group %ld, fc-group %ld (head share %.1f%%)\n",
                model.param_count(true), model.param_count(false),
                100.0 * model.param_count(false) /
                    (model.param_count(true) + model.param_count(false)));
}

TEST_CASE("model: he_init sets every bias to 0.1 (float32-valued)") {
    CfoRegressor model;
    Rng rng(5);
    model.he_init(rng);
    const double expected = to_f32(0.1);
    for (Param* p : model.params()) {
        if (p->is_weight || p->name.find(".gamma") != std::string::npos) continue;
        for (double v : p->value) CHECK(v == expected);
    }
}

TEST_CASE("he_init: weight variance tracks 2/fan_out, deterministic per seed") {
    Linear wide(256, 512);
    auto params = wide.params();
    Rng rng(42);
    he_init_params(params, rng);
    double mean = 0, sq = 0;
    const auto& w = params[0]->value;
    for (double v : w) {
        mean += v;
        sq += v * v;
    }
    mean /= static_cast<double>(w.size());
    const double var = sq / static_cast<double>(w.size()) - mean * mean;
    CHECK(var == doctest::Approx(2.0 / 512.0).epsilon(0.10));

    Linear again(256, 512);
    auto params2 = again.params();
    Rng rng2(42);
    he_init_params(params2, rng2);
    CHECK(params2[0]->value == params[0]->value);
}

TEST_CASE("model: end-to-end gradients match finite differences") {
    CfoRegressor model;  // default dropout rates, masks fixed by reseeding
    Rng rng(7);
    model.he_init(rng);
    Tensor x = random_input(2, 24, 8);
    std::vector<double> target = {0.3, -0.2};
    auto params = model.params();

    constexpr uint64_t kMaskSeed = 555;
    auto loss_fn = [&] {
        Rng drop(kMaskSeed);
        Tensor pred = model.forward(x, Mode::kTrain, &drop);
        double mse = 0;
        for (size_t i = 0; i < target.size(); ++i) {
            const double d = pred.data[i] - target[i];
            mse += d * d;
        }
        return mse / static_cast<double>(target.size());
    };

    Rng drop(kMaskSeed);
    Tensor pred = model.forward(x, Mode::kTrain, &drop);
    Tensor dout({2, 1});
    for (int i = 0; i < 2; ++i)
        dout.data[i] = 2.0 * (pred.data[i] - target[i]) / static_cast<double>(target.size());
    model.zero_grad();
    model.backward(dout);

    // Gradients below the FD roundoff floor (~|loss|*eps/h) count as zero.
    CHECK(fd_check_params(params, loss_fn, /*max_checks_per_param=*/6, /*h=*/1e-5,
                          /*noise_floor=*/1e-6) < 1e-3);
}

TEST_CASE("model: head-only backward leaves trunk gradients untouched") {
    CfoRegressor model;
    Rng rng(9);
    model.he_init(rng);
    Tensor x = random_input(2, 48, 10);
    Tensor pooled = model.trunk_features(x);
    Tensor pred = model.forward_head(pooled, Mode::kEval);
    model.zero_grad();
    Tensor dout({2, 1});
    dout.data = {1.0, -1.0};
    model.backward_head(dout);
    for (Param* p : model.trunk_params())
        for (double g : p->grad) CHECK(g == 0.0);
    double head_norm = 0;
    for (Param* p : model.head_params())
        for (double g : p->grad) head_norm += g * g;
    CHECK(head_norm > 0.0);
}

TEST_CASE("loss_mse_l2: reference values") {
    CfoRegressor model;
    auto params = model.params();
    Tensor pred({3, 1});
    pred.data = {1.0, 2.0, 3.0};
    CHECK(loss_mse_l2(pred, {1.0, 2.0, 3.0}, params, 0.0) == 0.0);
    CHECK(loss_mse_l2(pred, {0.0, 1.0, 2.0}, params, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(loss_mse_l2(pred, {1.0}, params, 0.0), std::invalid_argument);

    // lambda couples only weight parameters
    Rng rng(11);
    model.he_init(rng);
    double wsum = 0;
    for (Param* p : params)
        if (p->is_weight)
            for (double v : p->value) wsum += v * v;
    const double loss = loss_mse_l2(pred, {1.0, 2.0, 3.0}, params, 1e-4);
    CHECK(loss == doctest::Approx(1e-4 * wsum).epsilon(1e-9));
}

TEST_CASE("checkpoint: save/load/forward is bit-exact") {
    CfoRegressor model;
    Rng rng(13);
    model.he_init(rng);
    // flow a couple of training batches so running stats are non-trivial
    Rng drop(14);
    Tensor warm = random_input(4, 64, 15);
    (void)model.forward(warm, Mode::kTrain, &drop);

    FeatureStats stats;
    stats.mean.assign(64, 0.25);
    stats.stddev.assign(64, 1.5);
    OfdmConfig cfg;
    AdamState opt;
    opt.init_for(model.params());
    Checkpoint ck = snapshot_model(model, opt, stats, cfg, 0.123);
    save_checkpoint(ck, "ckpt_roundtrip.cfof");
    Checkpoint loaded = load_checkpoint("ckpt_roundtrip.cfof");

    CHECK(loaded.arch_hash == model.arch_hash());
    CHECK(loaded.params == ck.params);
    CHECK(loaded.buffers == ck.buffers);
    CHECK(loaded.stats.mean == stats.mean);
    CHECK(loaded.ofdm == cfg);

    Tensor x = random_input(3, 64, 16);
    Tensor before = model.forward(x, Mode::kEval);
    CfoRegressor fresh;
    restore_model(fresh, loaded);
    Tensor after = fresh.forward(x, Mode::kEval);
    CHECK(before.data == after.data);
}

TEST_CASE("checkpoint: corrupted magic and architecture mismatch are refused") {
    CfoRegressor model;
    Rng rng(17);
    model.he_init(rng);
    FeatureStats stats;
    stats.mean.assign(8, 0.0);
    stats.stddev.assign(8, 1.0);
    AdamState opt;
    opt.init_for(model.params());
    Checkpoint ck = snapshot_model(model, opt, stats, OfdmConfig{}, 0.0);
    save_checkpoint(ck, "ckpt_magic.cfof");

    {
        FILE* f = std::fopen("ckpt_magic.cfof", "r+b");
        REQUIRE(f != nullptr);
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint("ckpt_magic.cfof"), std::runtime_error);

    save_checkpoint(ck, "ckpt_arch.cfof");
    Checkpoint ok = load_checkpoint("ckpt_arch.cfof");
    CfoRegressor other(0.3, 0.3);  // different dropout configuration
    CHECK(other.arch_hash() != model.arch_hash());
    CHECK_THROWS_AS(restore_model(other, ok), std::runtime_error);
}

TEST_CASE("checkpoint: truncated file rejected") {
    CfoRegressor model;
    Rng rng(19);
    model.he_init(rng);
    FeatureStats stats;
    stats.mean.assign(8, 0.0);
    stats.stddev.assign(8, 1.0);
    AdamState opt;
    opt.init_for(model.params());
    save_checkpoint(snapshot_model(model, opt, stats, OfdmConfig{}, 0.0), "ckpt_trunc.cfof");
    // truncate to half
    FILE* f = std::fopen("ckpt_trunc.cfof", "rb");
    REQUIRE(f != nullptr);
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fclose(f);
    CHECK(truncate("ckpt_trunc.cfof", size / 2) == 0);
    CHECK_THROWS_AS(load_checkpoint("ckpt_trunc.cfof"), std::runtime_error);
}

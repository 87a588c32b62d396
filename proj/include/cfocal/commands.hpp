#pragma once

#include <string>
#include <vector>

#include "cfocal/config_text.hpp"
#include "cfocal/ofdm.hpp"

namespace cfocal {

/// Resolved options for one CLI invocation. Serialized verbatim into the run
/// manifest, so re-running with `--config <manifest>` reproduces the run.
struct RunConfig {
    std::string command;
    std::string out_dir = ".";
    uint64_t seed = 1;
    std::vector<double> snr_list;
    int trials = 0;  // 0 = per-command default
    std::string checkpoint_path;
    std::string finetuned_path;
    std::string profile_name;
    std::string profiles_file;
    std::vector<std::string> captures;
    OfdmConfig ofdm;
    long train_n = 50000;
    long val_n = 5000;
    int epochs = 0;          // 0 = per-command default
    int batch_size = 0;      // 0 = per-command default
    double learning_rate = 0;  // 0 = per-command default
    double snr_db = 10.0;    // capture SNR for simulate/finetune/eval-ber
    int frames = 1000;       // capture length for simulate/finetune/eval-ber
    int capture_taps = 2;    // channel taps for emulated captures

    /// Canonical manifest text (fixed key order, config hash appended).
    std::string serialize() const;
    /// Applies keys found in a parsed config file over the current values.
    void apply(const TextConfig& file);

    DeviceProfile resolve_profile() const;
};

std::string format_double(double v);
uint64_t config_hash(const std::string& serialized);

namespace commands {

int run_crlb(const RunConfig& cfg);
int run_simulate(const RunConfig& cfg);
int run_pretrain(const RunConfig& cfg);
int run_finetune(const RunConfig& cfg);
int run_eval_variance(const RunConfig& cfg);
int run_eval_errdist(const RunConfig& cfg);
int run_eval_ber(const RunConfig& cfg);
int run_constellation(const RunConfig& cfg);

/// Dispatches on cfg.command; throws std::invalid_argument for unknown names.
int dispatch(const RunConfig& cfg);

}  // namespace commands

}  // namespace cfocal

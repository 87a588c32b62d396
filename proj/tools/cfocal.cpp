// cfocal - OFDM CFO calibration toolkit
//
// Subcommands: crlb, simulate, pretrain, finetune, eval-variance,
// eval-errdist, eval-ber, constellation. Every run writes its outputs plus a
// manifest-<command>.txt; re-running `cfocal <command> --config <manifest>`
// reproduces the outputs byte for byte.

#include <malloc.h>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfocal/commands.hpp"
#include "cfocal/config_text.hpp"

using cfocal::RunConfig;

namespace {

// --config is resolved before CLI11 so explicit flags override file values.
std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc - 1; ++i)
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    return "";
}

void add_common_options(CLI::App* cmd, RunConfig& cfg, std::string& snr_csv,
                        std::string& captures_csv) {
    cmd->add_option("--config", "config file applied before other flags")
        ->expected(1);  // consumed by the pre-scan
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--snr", snr_csv, "comma-separated SNR list in dB");
    cmd->add_option("--trials", cfg.trials, "Monte Carlo trials per SNR point");
    cmd->add_option("--checkpoint", cfg.checkpoint_path, "pretrained checkpoint path");
    cmd->add_option("--finetuned", cfg.finetuned_path, "device checkpoint path");
    cmd->add_option("--profile", cfg.profile_name, "device profile name");
    cmd->add_option("--profiles-file", cfg.profiles_file, "profile definitions file");
    cmd->add_option("--captures", captures_csv, "comma-separated capture base paths");
    cmd->add_option("--symbol-len", cfg.ofdm.symbol_len, "OFDM symbol length K");
    cmd->add_option("--cp-len", cfg.ofdm.cp_len, "cyclic prefix length G");
    cmd->add_option("--num-symbols", cfg.ofdm.num_symbols, "OFDM symbols per frame");
    cmd->add_option("--sample-rate", cfg.ofdm.sample_rate_hz, "sample rate in Hz");
    cmd->add_option("--train-n", cfg.train_n, "pretraining set size");
    cmd->add_option("--val-n", cfg.val_n, "validation set size");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--batch", cfg.batch_size, "batch size");
    cmd->add_option("--lr", cfg.learning_rate, "learning rate");
    cmd->add_option("--snr-db", cfg.snr_db, "capture SNR in dB");
    cmd->add_option("--frames", cfg.frames, "frames per capture");
    cmd->add_option("--taps", cfg.capture_taps, "channel taps for emulated captures");
}

}  // namespace

int main(int argc, char** argv) {
    // Training churns large scratch buffers; keep freed arenas mapped instead
    // of returning them to the kernel every batch.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);

    RunConfig cfg;
    const std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) {
        try {
            cfg.apply(cfocal::parse_config_file(config_path));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }

    CLI::App app{"OFDM carrier-frequency-offset calibration toolkit"};
    app.require_subcommand(1);
    std::string snr_csv, captures_csv;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"crlb", "frequency-estimation variance bound sweep"},
        {"simulate", "emulate device captures"},
        {"pretrain", "train the CFO regressor on synthetic frames"},
        {"finetune", "adapt the regression head to one device"},
        {"eval-variance", "estimator error variance vs the bound"},
        {"eval-errdist", "raw per-trial estimation errors"},
        {"eval-ber", "bit error rate by compensation method"},
        {"constellation", "compensated differential constellation dump"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        add_common_options(sub, cfg, snr_csv, captures_csv);
    }

    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    const std::string chosen = active->get_name();
    if (!cfg.command.empty() && !config_path.empty() && cfg.command != chosen) {
        std::fprintf(stderr, "error: config file is for '%s' but '%s' was invoked\n",
                     cfg.command.c_str(), chosen.c_str());
        return 1;
    }
    cfg.command = chosen;
    if (active->count("--snr")) {
        cfg.snr_list.clear();
        std::string item;
        for (char c : snr_csv + ",") {
            if (c == ',') {
                if (!item.empty()) cfg.snr_list.push_back(std::stod(item));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
    }
    if (active->count("--captures")) {
        cfg.captures.clear();
        std::string item;
        for (char c : captures_csv + ",") {
            if (c == ',') {
                if (!item.empty()) cfg.captures.push_back(item);
                item.clear();
            } else {
                item.push_back(c);
            }
        }
    }

    try {
        return cfocal::commands::dispatch(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

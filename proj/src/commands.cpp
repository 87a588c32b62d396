#include "cfocal/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cfocal/capture.hpp"
#include "cfocal/dataset.hpp"
#include "cfocal/demod_loss.hpp"
#include "cfocal/estimators.hpp"
#include "cfocal/finetune.hpp"
#include "cfocal/model.hpp"
#include "cfocal/training.hpp"
#include "cfocal/version.hpp"

namespace cfocal {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

uint64_t config_hash(const std::string& serialized) { return fnv1a(serialized); }

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(std::stod(item));
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header) : path_(path), f_(path) {
        if (!f_) throw std::runtime_error("cannot write " + path);
        f_ << header << "\n";
    }
    void row(const std::string& r) { f_ << r << "\n"; }
    void close() {
        f_.flush();
        if (!f_) throw std::runtime_error("short write to " + path_);
        f_.close();
    }

private:
    std::string path_;
    std::ofstream f_;
};

void write_manifest(const RunConfig& cfg) {
    const fs::path path = fs::path(cfg.out_dir) / ("manifest-" + cfg.command + ".txt");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << cfg.serialize();
}

void ensure_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

struct LoadedModel {
    Checkpoint ckpt;
    CfoRegressor model;
};

LoadedModel load_model(const std::string& path) {
    if (path.empty()) throw std::invalid_argument("a --checkpoint path is required");
    LoadedModel lm{load_checkpoint(path), CfoRegressor{}};
    restore_model(lm.model, lm.ckpt);
    return lm;
}

std::vector<Capture> gather_captures(const RunConfig& cfg, uint64_t emulate_seed_tag) {
    std::vector<Capture> caps;
    if (!cfg.captures.empty()) {
        for (const auto& base : cfg.captures) caps.push_back(ingest_capture(base));
        return caps;
    }
    if (cfg.profile_name.empty())
        throw std::invalid_argument("need --captures or --profile to obtain frames");
    const DeviceProfile profile = cfg.resolve_profile();
    const std::string base = out_path(cfg, "capture-" + profile.name);
    emulate_device_captures(profile, cfg.frames, cfg.ofdm, cfg.snr_db,
                            derive_seed(cfg.seed, emulate_seed_tag), base, cfg.capture_taps);
    caps.push_back(ingest_capture(base));
    return caps;
}

/// Per-frame CFO estimates over a capture, one vector per requested method.
std::vector<double> dnn_estimates(const Checkpoint& ckpt, CfoRegressor& model,
                                  const std::vector<ComplexBuffer>& frames,
                                  const OfdmConfig& ofdm) {
    const long dim = static_cast<long>(ofdm.cp_len) * ofdm.num_symbols;
    std::vector<double> features(frames.size() * dim);
    for (size_t i = 0; i < frames.size(); ++i) {
        PhaseFeature f = cp_phase_features(frames[i], ofdm);
        std::copy(f.phi.begin(), f.phi.end(), features.begin() + i * dim);
    }
    return predict(model, features, static_cast<long>(frames.size()), dim, ckpt.stats);
}

}  // namespace

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "command = " << command << "\n";
    os << "build = " << kBuildId << "\n";
    os << "out = " << out_dir << "\n";
    os << "seed = " << seed << "\n";
    os << "symbol_len = " << ofdm.symbol_len << "\n";
    os << "cp_len = " << ofdm.cp_len << "\n";
    os << "num_symbols = " << ofdm.num_symbols << "\n";
    os << "sample_rate_hz = " << format_double(ofdm.sample_rate_hz) << "\n";
    os << "snr = " << join_doubles(snr_list) << "\n";
    os << "trials = " << trials << "\n";
    os << "checkpoint = " << checkpoint_path << "\n";
    os << "finetuned = " << finetuned_path << "\n";
    os << "profile = " << profile_name << "\n";
    os << "profiles_file = " << profiles_file << "\n";
    os << "captures = " << join_strings(captures) << "\n";
    os << "train_n = " << train_n << "\n";
    os << "val_n = " << val_n << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "learning_rate = " << format_double(learning_rate) << "\n";
    os << "snr_db = " << format_double(snr_db) << "\n";
    os << "frames = " << frames << "\n";
    os << "capture_taps = " << capture_taps << "\n";
    std::string text = os.str();
    char hash_line[40];
    std::snprintf(hash_line, sizeof(hash_line), "config_hash = 0x%016llx\n",
                  static_cast<unsigned long long>(config_hash(text)));
    return text + hash_line;
}

void RunConfig::apply(const TextConfig& file) {
    auto get = [&](const std::string& key) { return file.get("", key); };
    auto has = [&](const std::string& key) { return file.has("", key); };
    if (has("command")) command = get("command");
    if (has("out")) out_dir = get("out");
    if (has("seed")) seed = std::stoull(get("seed"));
    if (has("symbol_len")) ofdm.symbol_len = std::stoi(get("symbol_len"));
    if (has("cp_len")) ofdm.cp_len = std::stoi(get("cp_len"));
    if (has("num_symbols")) ofdm.num_symbols = std::stoi(get("num_symbols"));
    if (has("sample_rate_hz")) ofdm.sample_rate_hz = std::stod(get("sample_rate_hz"));
    if (has("snr")) snr_list = split_doubles(get("snr"));
    if (has("trials")) trials = std::stoi(get("trials"));
    if (has("checkpoint")) checkpoint_path = get("checkpoint");
    if (has("finetuned")) finetuned_path = get("finetuned");
    if (has("profile")) profile_name = get("profile");
    if (has("profiles_file")) profiles_file = get("profiles_file");
    if (has("captures")) captures = split_list(get("captures"));
    if (has("train_n")) train_n = std::stol(get("train_n"));
    if (has("val_n")) val_n = std::stol(get("val_n"));
    if (has("epochs")) epochs = std::stoi(get("epochs"));
    if (has("batch_size")) batch_size = std::stoi(get("batch_size"));
    if (has("learning_rate")) learning_rate = std::stod(get("learning_rate"));
    if (has("snr_db")) snr_db = std::stod(get("snr_db"));
    if (has("frames")) frames = std::stoi(get("frames"));
    if (has("capture_taps")) capture_taps = std::stoi(get("capture_taps"));
}

DeviceProfile RunConfig::resolve_profile() const {
    auto profiles = profiles_file.empty() ? builtin_profiles() : parse_profiles(profiles_file);
    auto it = profiles.find(profile_name);
    if (it == profiles.end())
        throw std::invalid_argument("unknown device profile '" + profile_name + "'");
    return it->second;
}

namespace commands {

int run_crlb(const RunConfig& cfg) {
    if (cfg.snr_list.empty()) throw std::invalid_argument("crlb: --snr list must not be empty");
    cfg.ofdm.validate();
    ensure_out_dir(cfg);
    // Constant-modulus reference frame: per-sample power one.
    ComplexBuffer unit(cfg.ofdm.frame_len(), cplx(1.0, 0.0));
    CsvWriter csv(out_path(cfg, "crlb.csv"), "snr_db,crlb_hz2");
    for (double snr_db : cfg.snr_list) {
        const double bound =
            crlb_hz2(std::pow(10.0, snr_db / 10.0), unit, cfg.ofdm.sample_rate_hz);
        char row[96];
        std::snprintf(row, sizeof(row), "%.10g,%.10g", snr_db, bound);
        csv.row(row);
    }
    csv.close();
    write_manifest(cfg);
    return 0;
}

int run_simulate(const RunConfig& cfg) {
    cfg.ofdm.validate();
    if (cfg.profile_name.empty()) throw std::invalid_argument("simulate: --profile is required");
    ensure_out_dir(cfg);
    const DeviceProfile profile = cfg.resolve_profile();
    const std::string base = out_path(cfg, profile.name);
    EmulatedCapture cap = emulate_device_captures(profile, cfg.frames, cfg.ofdm, cfg.snr_db,
                                                   cfg.seed, base, cfg.capture_taps);
    std::printf("wrote %s.cf32 (%d frames, theta %.6f)\n", base.c_str(), cfg.frames,
                cap.true_theta.value);
    write_manifest(cfg);
    return 0;
}

int run_pretrain(const RunConfig& cfg) {
    cfg.ofdm.validate();
    ensure_out_dir(cfg);
    SimDatasetSpec spec;
    spec.n_train = cfg.train_n;
    spec.n_val = cfg.val_n;
    spec.master_seed = cfg.seed;

    TrainConfig tc;
    tc.epochs = cfg.epochs > 0 ? cfg.epochs : 15;
    tc.batch_size = cfg.batch_size > 0 ? cfg.batch_size : 128;
    tc.learning_rate = cfg.learning_rate > 0 ? cfg.learning_rate : 1e-3;
    tc.seed = cfg.seed;

    {
        CfoRegressor probe;
        std::printf("parameters: conv-group %ld, fc-group %ld\n", probe.param_count(true),
                    probe.param_count(false));
    }
    PretrainResult res = pretrain(spec, cfg.ofdm, tc);
    const std::string ckpt_path = out_path(cfg, "pretrained.cfof");
    save_checkpoint(res.checkpoint, ckpt_path);
    std::printf("best validation mse %.6e -> %s\n", res.history.best_val_loss, ckpt_path.c_str());
    write_manifest(cfg);
    return 0;
}

int run_finetune(const RunConfig& cfg) {
    LoadedModel base = load_model(cfg.checkpoint_path);
    RunConfig resolved = cfg;
    resolved.ofdm = base.ckpt.ofdm;  // captures must match the checkpoint geometry
    ensure_out_dir(cfg);
    std::vector<Capture> caps = gather_captures(resolved, /*emulate_seed_tag=*/77);

    FineTuneConfig fc;
    fc.epochs = cfg.epochs > 0 ? cfg.epochs : 20;
    fc.batch_size = cfg.batch_size > 0 ? cfg.batch_size : 32;
    fc.learning_rate = cfg.learning_rate > 0 ? cfg.learning_rate : 1e-4;
    fc.seed = cfg.seed;

    {
        CfoRegressor probe;
        std::printf("parameters: conv-group %ld (frozen), fc-group %ld (adapted)\n",
                    probe.param_count(true), probe.param_count(false));
    }
    FineTuneResult res = finetune(base.ckpt, caps, fc);
    const std::string device = caps.front().meta.device_id;
    const std::string ckpt_path = out_path(cfg, "finetuned-" + device + ".cfof");
    save_checkpoint(res.device_checkpoint, ckpt_path);
    std::printf("demod loss %.6e -> %.6e, wrote %s\n", res.initial_demod_loss,
                res.final_demod_loss, ckpt_path.c_str());
    write_manifest(cfg);
    return 0;
}

int run_eval_variance(const RunConfig& cfg) {
    if (cfg.snr_list.empty())
        throw std::invalid_argument("eval-variance: --snr list must not be empty");
    LoadedModel lm = load_model(cfg.checkpoint_path);
    const OfdmConfig ofdm = lm.ckpt.ofdm;
    const int trials = cfg.trials > 0 ? cfg.trials : 2000;
    ensure_out_dir(cfg);

    SimDatasetSpec spec;
    spec.master_seed = cfg.seed;
    ComplexBuffer unit(ofdm.frame_len(), cplx(1.0, 0.0));
    const long dim = static_cast<long>(ofdm.cp_len) * ofdm.num_symbols;

    CsvWriter csv(out_path(cfg, "variance.csv"), "snr_db,dnn_var_hz2,cp_var_hz2,crlb_hz2");
    for (size_t si = 0; si < cfg.snr_list.size(); ++si) {
        const double snr_db = cfg.snr_list[si];
        std::vector<double> truth_hz(trials), cp_hz(trials);
        std::vector<double> features(static_cast<size_t>(trials) * dim);
        const uint64_t stream = derive_seed(cfg.seed, 0xE0 + si);
        for (int t = 0; t < trials; ++t) {
            SimulatedFrame frame = simulate_frame(spec, ofdm, derive_seed(stream, t), snr_db);
            truth_hz[t] = theta_to_hz(frame.theta, ofdm);
            cp_hz[t] = cp_ml_estimate(frame.rx, ofdm).hz;
            PhaseFeature f = cp_phase_features(frame.rx, ofdm);
            std::copy(f.phi.begin(), f.phi.end(), features.begin() + static_cast<size_t>(t) * dim);
        }
        std::vector<double> dnn_theta = predict(lm.model, features, trials, dim, lm.ckpt.stats);
        std::vector<double> dnn_hz(trials);
        for (int t = 0; t < trials; ++t) dnn_hz[t] = theta_to_hz(dnn_theta[t], ofdm);

        const double dnn_var = error_stats(dnn_hz, truth_hz).variance;
        const double cp_var = error_stats(cp_hz, truth_hz).variance;
        const double bound = crlb_hz2(std::pow(10.0, snr_db / 10.0), unit, ofdm.sample_rate_hz);
        char row[160];
        std::snprintf(row, sizeof(row), "%.10g,%.10g,%.10g,%.10g", snr_db, dnn_var, cp_var, bound);
        csv.row(row);
    }
    csv.close();
    write_manifest(cfg);
    return 0;
}

int run_eval_errdist(const RunConfig& cfg) {
    if (cfg.snr_list.empty())
        throw std::invalid_argument("eval-errdist: --snr list must not be empty");
    const bool with_dnn = !cfg.checkpoint_path.empty();
    LoadedModel lm;
    OfdmConfig ofdm = cfg.ofdm;
    if (with_dnn) {
        lm = load_model(cfg.checkpoint_path);
        ofdm = lm.ckpt.ofdm;
    }
    const int trials = cfg.trials > 0 ? cfg.trials : (with_dnn ? 2000 : 10000);
    ensure_out_dir(cfg);

    SimDatasetSpec spec;
    spec.master_seed = cfg.seed;
    const long dim = static_cast<long>(ofdm.cp_len) * ofdm.num_symbols;

    CsvWriter csv(out_path(cfg, "errdist.csv"), "snr_db,method,error_hz");
    for (size_t si = 0; si < cfg.snr_list.size(); ++si) {
        const double snr_db = cfg.snr_list[si];
        std::vector<double> cp_err(trials);
        std::vector<double> truth_hz(trials);
        std::vector<double> features(static_cast<size_t>(trials) * dim);
        const uint64_t stream = derive_seed(cfg.seed, 0xD0 + si);
        for (int t = 0; t < trials; ++t) {
            SimulatedFrame frame = simulate_frame(spec, ofdm, derive_seed(stream, t), snr_db);
            truth_hz[t] = theta_to_hz(frame.theta, ofdm);
            cp_err[t] = cp_ml_estimate(frame.rx, ofdm).hz - truth_hz[t];
            if (with_dnn) {
                PhaseFeature f = cp_phase_features(frame.rx, ofdm);
                std::copy(f.phi.begin(), f.phi.end(),
                          features.begin() + static_cast<size_t>(t) * dim);
            }
        }
        // aggregation is order-independent: errors are sorted before writing
        std::sort(cp_err.begin(), cp_err.end());
        for (double e : cp_err) {
            char row[96];
            std::snprintf(row, sizeof(row), "%.10g,cp,%.10g", snr_db, e);
            csv.row(row);
        }
        if (with_dnn) {
            std::vector<double> dnn_theta = predict(lm.model, features, trials, dim, lm.ckpt.stats);
            std::vector<double> dnn_err(trials);
            for (int t = 0; t < trials; ++t)
                dnn_err[t] = theta_to_hz(dnn_theta[t], ofdm) - truth_hz[t];
            std::sort(dnn_err.begin(), dnn_err.end());
            for (double e : dnn_err) {
                char row[96];
                std::snprintf(row, sizeof(row), "%.10g,dnn,%.10g", snr_db, e);
                csv.row(row);
            }
        }
    }
    csv.close();
    write_manifest(cfg);
    return 0;
}

int run_eval_ber(const RunConfig& cfg) {
    LoadedModel pre = load_model(cfg.checkpoint_path);
    const OfdmConfig ofdm = pre.ckpt.ofdm;
    LoadedModel fine;
    const bool with_fine = !cfg.finetuned_path.empty();
    if (with_fine) fine = load_model(cfg.finetuned_path);

    RunConfig resolved = cfg;
    resolved.ofdm = ofdm;
    ensure_out_dir(cfg);
    std::vector<Capture> caps = gather_captures(resolved, /*emulate_seed_tag=*/88);

    CsvWriter csv(out_path(cfg, "ber.csv"), "device,method,ber");
    for (const Capture& cap : caps) {
        if (!(cap.meta.ofdm() == ofdm))
            throw std::invalid_argument("eval-ber: capture frame config mismatch");
        const long frame_len = ofdm.frame_len();
        const long bpf = ofdm.bits_per_frame();
        std::vector<ComplexBuffer> frames(cap.meta.n_frames);
        for (int i = 0; i < cap.meta.n_frames; ++i)
            frames[i].assign(cap.samples.begin() + static_cast<long>(i) * frame_len,
                             cap.samples.begin() + static_cast<long>(i + 1) * frame_len);

        std::vector<std::pair<std::string, std::vector<double>>> methods;
        methods.emplace_back("none", std::vector<double>(frames.size(), 0.0));
        {
            std::vector<double> cp(frames.size());
            for (size_t i = 0; i < frames.size(); ++i)
                cp[i] = cp_ml_estimate(frames[i], ofdm).theta;
            methods.emplace_back("cp", std::move(cp));
        }
        methods.emplace_back("pretrained", dnn_estimates(pre.ckpt, pre.model, frames, ofdm));
        if (with_fine)
            methods.emplace_back("finetuned", dnn_estimates(fine.ckpt, fine.model, frames, ofdm));

        for (const auto& [name, thetas] : methods) {
            long errors = 0, total = 0;
            for (size_t i = 0; i < frames.size(); ++i) {
                ComplexBuffer comp = apply_cfo(frames[i], Theta{-thetas[i]}, ofdm, 0);
                DemodResult demod = demodulate_frame(comp, ofdm);
                const uint8_t* tx = cap.bits.data() + static_cast<long>(i) * bpf;
                for (long b = 0; b < bpf; ++b) errors += (demod.bits[b] != tx[b]) ? 1 : 0;
                total += bpf;
            }
            char row[160];
            std::snprintf(row, sizeof(row), "%s,%s,%.10g", cap.meta.device_id.c_str(),
                          name.c_str(), static_cast<double>(errors) / static_cast<double>(total));
            csv.row(row);
        }
    }
    csv.close();
    write_manifest(cfg);
    return 0;
}

int run_constellation(const RunConfig& cfg) {
    LoadedModel lm = load_model(cfg.checkpoint_path);
    const OfdmConfig ofdm = lm.ckpt.ofdm;
    if (cfg.captures.size() != 1)
        throw std::invalid_argument("constellation: exactly one --captures path is required");
    ensure_out_dir(cfg);
    Capture cap = ingest_capture(cfg.captures.front());
    if (!(cap.meta.ofdm() == ofdm))
        throw std::invalid_argument("constellation: capture frame config mismatch");

    const long frame_len = ofdm.frame_len();
    std::vector<ComplexBuffer> frames(cap.meta.n_frames);
    for (int i = 0; i < cap.meta.n_frames; ++i)
        frames[i].assign(cap.samples.begin() + static_cast<long>(i) * frame_len,
                         cap.samples.begin() + static_cast<long>(i + 1) * frame_len);
    std::vector<double> thetas = dnn_estimates(lm.ckpt, lm.model, frames, ofdm);

    CsvWriter csv(out_path(cfg, "constellation.csv"), "frame,symbol,subcarrier,re,im");
    const int sym_len = ofdm.symbol_len + ofdm.cp_len;
    for (size_t i = 0; i < frames.size(); ++i) {
        ComplexBuffer comp = apply_cfo(frames[i], Theta{-thetas[i]}, ofdm, 0);
        for (int s = 0; s < ofdm.num_symbols; ++s) {
            ComplexBuffer sym(comp.begin() + static_cast<long>(s) * sym_len,
                              comp.begin() + static_cast<long>(s + 1) * sym_len);
            ComplexBuffer Y = dft(remove_cyclic_prefix(sym, ofdm.cp_len));
            DemodResult d = dqpsk_demodulate({Y});
            FreqSymbols norm = power_normalize({d.soft});
            for (size_t k = 0; k < norm[0].size(); ++k) {
                char row[160];
                std::snprintf(row, sizeof(row), "%zu,%d,%zu,%.10g,%.10g", i, s, k + 1,
                              norm[0][k].real(), norm[0][k].imag());
                csv.row(row);
            }
        }
    }
    csv.close();
    write_manifest(cfg);
    return 0;
}

int dispatch(const RunConfig& cfg) {
    if (cfg.command == "crlb") return run_crlb(cfg);
    if (cfg.command == "simulate") return run_simulate(cfg);
    if (cfg.command == "pretrain") return run_pretrain(cfg);
    if (cfg.command == "finetune") return run_finetune(cfg);
    if (cfg.command == "eval-variance") return run_eval_variance(cfg);
    if (cfg.command == "eval-errdist") return run_eval_errdist(cfg);
    if (cfg.command == "eval-ber") return run_eval_ber(cfg);
    if (cfg.command == "constellation") return run_constellation(cfg);
    throw std::invalid_argument("unknown command '" + cfg.command + "'");
}

}  // namespace commands

}  // namespace cfocal

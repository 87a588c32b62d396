#include "cfocal/capture.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cfocal {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::map<std::string, std::string> read_kv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("capture: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const std::string& path) {
    auto it = kv.find(key);
    if (it == kv.end())
        throw std::runtime_error("capture: " + path + " missing required key '" + key + "'");
    return it->second;
}

}  // namespace

OfdmConfig CaptureMeta::ofdm() const {
    OfdmConfig cfg;
    cfg.symbol_len = symbol_len;
    cfg.cp_len = cp_len;
    cfg.num_symbols = num_symbols;
    cfg.sample_rate_hz = sample_rate_hz;
    return cfg;
}

void write_bits(const std::string& path, const BitStream& bits) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("capture: cannot write " + path);
    uint8_t byte = 0;
    int filled = 0;
    for (uint8_t b : bits) {
        byte = static_cast<uint8_t>((byte << 1) | (b & 1));
        if (++filled == 8) {
            f.put(static_cast<char>(byte));
            byte = 0;
            filled = 0;
        }
    }
    if (filled > 0) f.put(static_cast<char>(byte << (8 - filled)));
}

BitStream read_bits(const std::string& path, size_t bit_count) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("capture: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() != (bit_count + 7) / 8)
        throw std::runtime_error("capture: bits file " + path + " has wrong size");
    BitStream bits(bit_count);
    for (size_t i = 0; i < bit_count; ++i)
        bits[i] = (static_cast<uint8_t>(bytes[i / 8]) >> (7 - i % 8)) & 1;
    return bits;
}

void write_capture(const std::string& base_path, const ComplexBuffer& samples,
                   const CaptureMeta& meta, const BitStream& bits) {
    {
        std::ofstream f(base_path + ".cf32", std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("capture: cannot write " + base_path + ".cf32");
        std::vector<float> interleaved(samples.size() * 2);
        for (size_t i = 0; i < samples.size(); ++i) {
            interleaved[2 * i] = static_cast<float>(samples[i].real());
            interleaved[2 * i + 1] = static_cast<float>(samples[i].imag());
        }
        f.write(reinterpret_cast<const char*>(interleaved.data()),
                static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
    }
    write_bits(base_path + ".bits", bits);
    {
        std::ofstream f(base_path + ".meta", std::ios::trunc);
        if (!f) throw std::runtime_error("capture: cannot write " + base_path + ".meta");
        f << "device_id = " << meta.device_id << "\n";
        f << "sample_rate_hz = " << fmt_double(meta.sample_rate_hz) << "\n";
        f << "carrier_hz = " << fmt_double(meta.carrier_hz) << "\n";
        f << "symbol_len = " << meta.symbol_len << "\n";
        f << "cp_len = " << meta.cp_len << "\n";
        f << "num_symbols = " << meta.num_symbols << "\n";
        f << "n_frames = " << meta.n_frames << "\n";
        f << "bits_file = " << meta.bits_file << "\n";
        if (meta.seed) f << "seed = " << *meta.seed << "\n";
        if (meta.true_theta) f << "true_theta = " << fmt_double(*meta.true_theta) << "\n";
    }
}

Capture ingest_capture(const std::string& path) {
    std::string base = path;
    if (base.size() > 5 && base.substr(base.size() - 5) == ".meta")
        base = base.substr(0, base.size() - 5);
    const std::string meta_path = base + ".meta";
    auto kv = read_kv(meta_path);

    Capture cap;
    cap.meta.device_id = require(kv, "device_id", meta_path);
    cap.meta.sample_rate_hz = std::stod(require(kv, "sample_rate_hz", meta_path));
    cap.meta.carrier_hz = std::stod(require(kv, "carrier_hz", meta_path));
    cap.meta.symbol_len = std::stoi(require(kv, "symbol_len", meta_path));
    cap.meta.cp_len = std::stoi(require(kv, "cp_len", meta_path));
    cap.meta.num_symbols = std::stoi(require(kv, "num_symbols", meta_path));
    cap.meta.n_frames = std::stoi(require(kv, "n_frames", meta_path));
    cap.meta.bits_file = require(kv, "bits_file", meta_path);
    if (kv.count("seed")) cap.meta.seed = std::stoull(kv.at("seed"));
    if (kv.count("true_theta")) cap.meta.true_theta = std::stod(kv.at("true_theta"));
    cap.meta.ofdm().validate();

    const std::string data_path = base + ".cf32";
    std::ifstream f(data_path, std::ios::binary);
    if (!f) throw std::runtime_error("capture: cannot open " + data_path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(float) != 0)
        throw std::runtime_error("capture: " + data_path + " is not float32-aligned");
    const size_t n_floats = bytes.size() / sizeof(float);
    if (n_floats % 2 != 0)
        throw std::runtime_error("capture: " + data_path + " has an odd float count");
    const size_t n_samples = n_floats / 2;
    const size_t expected = static_cast<size_t>(cap.meta.n_frames) * cap.meta.ofdm().frame_len();
    if (n_samples != expected)
        throw std::runtime_error("capture: " + data_path + " holds " + std::to_string(n_samples) +
                                 " samples, metadata implies " + std::to_string(expected));
    cap.samples.resize(n_samples);
    const float* raw = reinterpret_cast<const float*>(bytes.data());
    for (size_t i = 0; i < n_samples; ++i)
        cap.samples[i] = cplx(static_cast<double>(raw[2 * i]), static_cast<double>(raw[2 * i + 1]));

    const fs::path bits_path = fs::path(base).parent_path() / cap.meta.bits_file;
    const size_t bit_count =
        static_cast<size_t>(cap.meta.n_frames) * cap.meta.ofdm().bits_per_frame();
    cap.bits = read_bits(bits_path.string(), bit_count);
    return cap;
}

EmulatedCapture emulate_device_captures(const DeviceProfile& profile, int n_frames,
                                        const OfdmConfig& cfg, double snr_db, uint64_t seed,
                                        const std::string& base_path, int max_taps,
                                        double decay) {
    cfg.validate();
    profile.validate(cfg);
    if (n_frames < 1) throw std::invalid_argument("emulate_device_captures: need frames");

    Rng bits_rng(derive_seed(seed, 1));
    Rng chan_rng(derive_seed(seed, 2));
    Rng render_rng(derive_seed(seed, 3));

    BitStream all_bits;
    all_bits.reserve(static_cast<size_t>(n_frames) * cfg.bits_per_frame());
    std::vector<ComplexBuffer> frames;
    frames.reserve(n_frames);
    std::vector<ChannelTaps> channels;
    channels.reserve(n_frames);
    for (int i = 0; i < n_frames; ++i) {
        BitStream bits(cfg.bits_per_frame());
        for (auto& b : bits) b = static_cast<uint8_t>(bits_rng.next_u64() & 1);
        frames.push_back(build_frame(bits, cfg));
        all_bits.insert(all_bits.end(), bits.begin(), bits.end());
        channels.push_back(draw_random_channel(chan_rng, max_taps, decay));
    }

    RenderResult rendered =
        render_capture(frames, profile, channels, NoiseSpec{snr_db}, cfg, render_rng);

    EmulatedCapture out;
    out.base_path = base_path;
    out.true_theta = rendered.true_theta;
    out.meta.device_id = profile.name;
    out.meta.sample_rate_hz = cfg.sample_rate_hz;
    out.meta.carrier_hz = profile.carrier_hz;
    out.meta.symbol_len = cfg.symbol_len;
    out.meta.cp_len = cfg.cp_len;
    out.meta.num_symbols = cfg.num_symbols;
    out.meta.n_frames = n_frames;
    out.meta.bits_file = fs::path(base_path).filename().string() + ".bits";
    out.meta.seed = seed;
    out.meta.true_theta = rendered.true_theta.value;
    write_capture(base_path, rendered.capture, out.meta, all_bits);
    return out;
}

}  // namespace cfocal

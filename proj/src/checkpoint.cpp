#include "cfocal/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace cfocal {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'O', 'F'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_f32_array(std::string& out, const std::vector<double>& values) {
    put_u64(out, values.size());
    for (double v : values) put_f32(out, static_cast<float>(v));
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> f32_array() {
        const uint64_t n = u64();
        need(n * 4);
        std::vector<double> out(n);
        for (uint64_t i = 0; i < n; ++i) out[i] = static_cast<double>(f32());
        return out;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    uint8_t byte() { return static_cast<uint8_t>(bytes_[pos_++]); }
    void need(size_t n) {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::string bytes_;
    size_t pos_ = 0;
};

void add_section(std::string& out, const std::string& name, const std::string& payload) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u64(out, payload.size());
    out += payload;
}

std::string array_list_payload(const std::vector<std::vector<double>>& arrays) {
    std::string p;
    put_u32(p, static_cast<uint32_t>(arrays.size()));
    for (const auto& a : arrays) put_f32_array(p, a);
    return p;
}

std::vector<std::vector<double>> read_array_list(Reader& r) {
    const uint32_t count = r.u32();
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) out.push_back(r.f32_array());
    return out;
}

}  // namespace

Checkpoint snapshot_model(CfoRegressor& model, const AdamState& opt, const FeatureStats& stats,
                          const OfdmConfig& cfg, double best_val_loss) {
    Checkpoint ck;
    ck.arch_hash = model.arch_hash();
    ck.ofdm = cfg;
    for (const Param* p : model.params()) ck.params.push_back(p->value);
    for (const auto* b : model.buffers()) ck.buffers.push_back(*b);
    ck.opt = opt;
    ck.stats = stats;
    ck.best_val_loss = to_f32(best_val_loss);
    return ck;
}

void restore_model(CfoRegressor& model, const Checkpoint& ckpt) {
    if (ckpt.arch_hash != model.arch_hash())
        throw std::runtime_error("checkpoint: architecture hash mismatch, refusing to load");
    auto params = model.params();
    if (params.size() != ckpt.params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i]->value.size() != ckpt.params[i].size())
            throw std::runtime_error("checkpoint: parameter shape mismatch at " + params[i]->name);
        params[i]->value = ckpt.params[i];
    }
    auto buffers = model.buffers();
    if (buffers.size() != ckpt.buffers.size())
        throw std::runtime_error("checkpoint: buffer count mismatch");
    for (size_t i = 0; i < buffers.size(); ++i) {
        if (buffers[i]->size() != ckpt.buffers[i].size())
            throw std::runtime_error("checkpoint: buffer shape mismatch");
        *buffers[i] = ckpt.buffers[i];
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, ckpt.version);
    put_u64(out, ckpt.arch_hash);

    {
        std::string p;
        put_u32(p, static_cast<uint32_t>(ckpt.ofdm.symbol_len));
        put_u32(p, static_cast<uint32_t>(ckpt.ofdm.cp_len));
        put_u32(p, static_cast<uint32_t>(ckpt.ofdm.num_symbols));
        put_f64(p, ckpt.ofdm.sample_rate_hz);
        add_section(out, "ofdm", p);
    }
    add_section(out, "params", array_list_payload(ckpt.params));
    add_section(out, "buffers", array_list_payload(ckpt.buffers));
    add_section(out, "adam_m", array_list_payload(ckpt.opt.m));
    add_section(out, "adam_v", array_list_payload(ckpt.opt.v));
    {
        std::string p;
        put_u64(p, static_cast<uint64_t>(ckpt.opt.t));
        add_section(out, "adam_t", p);
    }
    {
        std::string p;
        put_f32_array(p, ckpt.stats.mean);
        add_section(out, "feat_mean", p);
    }
    {
        std::string p;
        put_f32_array(p, ckpt.stats.stddev);
        add_section(out, "feat_std", p);
    }
    {
        std::string p;
        put_f32(p, static_cast<float>(ckpt.best_val_loss));
        add_section(out, "best_val", p);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes));

    if (r.str(4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint: bad magic bytes");
    Checkpoint ck;
    ck.version = r.u32();
    if (ck.version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(ck.version));
    ck.arch_hash = r.u64();

    std::map<std::string, bool> seen;
    while (!r.done()) {
        const uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const uint64_t payload_len = r.u64();
        (void)payload_len;
        if (name == "ofdm") {
            ck.ofdm.symbol_len = static_cast<int>(r.u32());
            ck.ofdm.cp_len = static_cast<int>(r.u32());
            ck.ofdm.num_symbols = static_cast<int>(r.u32());
            ck.ofdm.sample_rate_hz = r.f64();
        } else if (name == "params") {
            ck.params = read_array_list(r);
        } else if (name == "buffers") {
            ck.buffers = read_array_list(r);
        } else if (name == "adam_m") {
            ck.opt.m = read_array_list(r);
        } else if (name == "adam_v") {
            ck.opt.v = read_array_list(r);
        } else if (name == "adam_t") {
            ck.opt.t = static_cast<long>(r.u64());
        } else if (name == "feat_mean") {
            ck.stats.mean = r.f32_array();
        } else if (name == "feat_std") {
            ck.stats.stddev = r.f32_array();
        } else if (name == "best_val") {
            ck.best_val_loss = static_cast<double>(r.f32());
        } else {
            r.str(payload_len);  // unknown section, skip
        }
        seen[name] = true;
    }
    for (const char* required : {"ofdm", "params", "buffers", "feat_mean", "feat_std"})
        if (!seen.count(required))
            throw std::runtime_error(std::string("checkpoint: missing section ") + required);
    return ck;
}

}  // namespace cfocal

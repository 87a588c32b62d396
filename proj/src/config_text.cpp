#include "cfocal/config_text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cfocal {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

bool TextConfig::has(const std::string& section, const std::string& key) const {
    for (const auto& [name, entries] : sections) {
        if (name != section) continue;
        for (const auto& [k, v] : entries)
            if (k == key) return true;
    }
    return false;
}

std::string TextConfig::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    for (const auto& [name, entries] : sections) {
        if (name != section) continue;
        for (const auto& [k, v] : entries)
            if (k == key) return v;
    }
    return fallback;
}

TextConfig parse_config_text(const std::string& text) {
    TextConfig cfg;
    cfg.sections.push_back({"", {}});
    std::istringstream in(text);
    std::string line;
    size_t current = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            cfg.sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
            current = cfg.sections.size() - 1;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: malformed line '" + line + "'");
        cfg.sections[current].second.emplace_back(trim(line.substr(0, eq)),
                                                  trim(line.substr(eq + 1)));
    }
    return cfg;
}

TextConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::map<std::string, DeviceProfile> builtin_profiles() {
    std::map<std::string, DeviceProfile> out;
    for (const DeviceProfile& p : {DeviceProfile::neutral(), DeviceProfile::stable(),
                                   DeviceProfile::mid(), DeviceProfile::lowcost()})
        out[p.name] = p;
    return out;
}

std::map<std::string, DeviceProfile> parse_profiles(const std::string& path) {
    TextConfig cfg = parse_config_file(path);
    std::map<std::string, DeviceProfile> out;
    for (const auto& [name, entries] : cfg.sections) {
        if (name.empty()) {
            if (!entries.empty())
                throw std::runtime_error("profiles: keys outside a [profile] section in " + path);
            continue;
        }
        DeviceProfile p;
        p.name = name;
        for (const auto& [k, v] : entries) {
            if (k == "sfo_ppm") p.sfo_ppm = std::stod(v);
            else if (k == "carrier_hz") p.carrier_hz = std::stod(v);
            else if (k == "lo_ppm") p.lo_ppm = std::stod(v);
            else if (k == "phase_noise_linewidth_hz") p.phase_noise_linewidth_hz = std::stod(v);
            else if (k == "iq_gain") p.iq_gain = std::stod(v);
            else if (k == "iq_phase_rad") p.iq_phase_rad = std::stod(v);
            else if (k == "iq_phase_deg") p.iq_phase_rad = std::stod(v) * M_PI / 180.0;
            else throw std::runtime_error("profiles: unknown key '" + k + "' in [" + name + "]");
        }
        out[name] = p;
    }
    return out;
}

}  // namespace cfocal

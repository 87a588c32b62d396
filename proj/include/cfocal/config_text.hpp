#pragma once

#include <map>
#include <string>
#include <vector>

#include "cfocal/impairments.hpp"

namespace cfocal {

/// Ordered key = value pairs; '#' comments and blank lines ignored.
/// Lines of the form [name] open a section (empty section name = top level).
struct TextConfig {
    // section -> ordered (key, value) pairs
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback = "") const;
};

TextConfig parse_config_text(const std::string& text);
TextConfig parse_config_file(const std::string& path);

/// Device fingerprints from a sectioned config file; unknown keys rejected.
std::map<std::string, DeviceProfile> parse_profiles(const std::string& path);

/// Built-in fingerprints: neutral, stable, mid, lowcost.
std::map<std::string, DeviceProfile> builtin_profiles();

}  // namespace cfocal

#pragma once

#include <string>
#include <vector>

#include "cfocal/model.hpp"
#include "cfocal/ofdm.hpp"
#include "cfocal/optimizer.hpp"
#include "cfocal/standardize.hpp"

namespace cfocal {

inline constexpr uint32_t kCheckpointVersion = 1;

/// Everything needed to reproduce evaluation-mode inference and resume
/// training: parameters, normalization buffers, optimizer moments, feature
/// statistics and the frame geometry they were fitted under. All arrays are
/// float32-valued, so the 32-bit file round-trips bit-exactly.
struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    uint64_t arch_hash = 0;
    OfdmConfig ofdm;
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> buffers;
    AdamState opt;
    FeatureStats stats;
    double best_val_loss = 0.0;
};

Checkpoint snapshot_model(CfoRegressor& model, const AdamState& opt, const FeatureStats& stats,
                          const OfdmConfig& cfg, double best_val_loss);

/// Throws std::runtime_error when the checkpoint's architecture hash or
/// array shapes do not match the model.
void restore_model(CfoRegressor& model, const Checkpoint& ckpt);

/// Binary format: magic "CFOF", u32 version, u64 architecture hash, then
/// length-prefixed named sections with little-endian float32 arrays.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws std::runtime_error on bad magic, version mismatch, or truncation.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cfocal

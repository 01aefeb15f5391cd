/**
 * Checkpoint container.
 *
 * Layout (all integers little-endian):
 *
 *   offset 0   8 bytes   magic "CDRDCKPT"
 *   offset 8   u32       format version (currently 1)
 *   offset 12  u64       manifest length L in bytes
 *   offset 20  L bytes   manifest, UTF-8 JSON:
 *                          {"entries": [{"name", "shape", "offset"}...],
 *                           "metadata": {...}, "version": 1}
 *   offset 20+L          payload of IEEE-754 binary64 values, little-endian
 *
 * "offset" is the byte offset of an entry inside the payload. Entries are
 * stored back to back in manifest order, so save(load(bytes)) == bytes.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdrdiff/optimizer.hpp"
#include "cdrdiff/tensor.hpp"

namespace cdrdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor value;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
    std::vector<NamedTensor> entries;
    nlohmann::json metadata = nlohmann::json::object();

    const Tensor* find(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters under their own names plus Adam moments under
/// "adam.m/<name>" and "adam.v/<name>"; the Adam step goes in metadata.
Checkpoint make_checkpoint(const ParameterSet& params, const AdamState* adam,
                           nlohmann::json metadata);

/// Copies checkpoint values into `params`. Every parameter must be present
/// with the same shape; the first offending name is reported otherwise.
void restore_parameters(const Checkpoint& ckpt, ParameterSet& params);
/// Restores Adam moments and step; requires a checkpoint written with them.
AdamState restore_adam(const Checkpoint& ckpt, const ParameterSet& params);

}  // namespace cdrdiff

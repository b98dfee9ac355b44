#pragma once

// Checkpoint container: named 64-bit tensors plus a metadata record.
//
// Byte layout (all integers little-endian):
//
//   offset  size        field
//   0       8           magic "SCLCKPT\0"
//   8       4  u32      format version (currently 1)
//   12      4  u32      metadata length M
//   16      M           metadata, compact JSON with sorted keys:
//                         {"format_version", "model_kind", "task_index",
//                          "seed", "extra": {...}}
//   ..      4  u32      entry count E
//   per entry (in insertion order):
//           4  u32      name length N
//           N           name (UTF-8)
//           4  u32      rank R
//           8R u64      extents
//           8P f64      values, row-major, P = product of extents
//   end-8   8  u64      FNV-1a 64 over every preceding byte
//
// save -> load is bit-exact; any byte change is caught by the checksum.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "scl/tensor.hpp"

namespace scl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
    std::uint32_t format_version = kCheckpointVersion;
    std::string model_kind;
    int task_index = 0;
    std::uint64_t seed = 0;
    nlohmann::json extra = nlohmann::json::object();
};

class Checkpoint {
public:
    CheckpointMetadata meta;

    void add(std::string name, const Tensor& value);
    void add_all(const ParameterList& params, const std::string& prefix = "");
    bool contains(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    // Copies stored values into `params` (matched by prefix + name, shape checked).
    void load_into(ParameterList& params, const std::string& prefix = "") const;
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& context);

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws DataError naming `path` on a missing, truncated, or corrupted file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scl

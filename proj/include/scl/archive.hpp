#pragma once

// Segment archive: a flat file of MelSegments plus a JSON sidecar holding
// split membership.
//
// Archive layout (little-endian):
//
//   offset  size        field
//   0       8           magic "SCLSEGS\0"
//   8       4  u32      format version (currently 1)
//   12      4  u32      pipeline version
//   16      8  u64      seed used for the split (or generation)
//   24      4  u32      mel bins (128)
//   28      4  u32      frames per segment (16)
//   32      8  u64      record count N
//   per record:
//           4  i32      label (class index, -1 for unlabeled generations)
//           4  u32      recording id length L
//           L           recording id (UTF-8)
//           4  u32      segment index within the recording
//           4*2048 f32  values, mel-major (values[m * 16 + t])
//   end-8   8  u64      FNV-1a 64 over every preceding byte
//
// Sidecar (<archive>.splits.json):
//   {"archive": <file name>, "seed": s, "count": N,
//    "train": [record indices], "val": [...], "test": [...],
//    "class_names": {"<index>": "<name>", ...}}

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scl/audio.hpp"

namespace scl::audio {

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::uint32_t kPipelineVersion = 1;

struct SegmentArchive {
    std::uint64_t seed = 0;
    std::uint32_t pipeline_version = kPipelineVersion;
    std::vector<MelSegment> segments;
};

std::vector<std::uint8_t> serialize_archive(const SegmentArchive& a);
SegmentArchive deserialize_archive(const std::vector<std::uint8_t>& bytes,
                                   const std::string& context);
void save_archive(const std::filesystem::path& path, const SegmentArchive& a);
SegmentArchive load_archive(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& archive);
void save_splits(const std::filesystem::path& archive, const Splits& s, std::uint64_t seed,
                 std::size_t count, const std::map<int, std::string>& class_names = {});
// Validates that indices are in range and no index appears in two splits.
Splits load_splits(const std::filesystem::path& archive, std::size_t count);

}  // namespace scl::audio

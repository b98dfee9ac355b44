#include "scl/archive.hpp"

#include <set>

#include "json.hpp"

#include "scl/binio.hpp"
#include "scl/errors.hpp"

namespace scl::audio {

namespace {
constexpr char kMagic[8] = {'S', 'C', 'L', 'S', 'E', 'G', 'S', '\0'};
}

std::vector<std::uint8_t> serialize_archive(const SegmentArchive& a) {
    binio::Writer w;
    w.bytes(std::string_view(kMagic, 8));
    w.u32(kArchiveVersion);
    w.u32(a.pipeline_version);
    w.u64(a.seed);
    w.u32(static_cast<std::uint32_t>(kMels));
    w.u32(static_cast<std::uint32_t>(kSegmentFrames));
    w.u64(a.segments.size());
    for (const auto& s : a.segments) {
        if (s.values.size() != kMels * kSegmentFrames) {
            throw DataError("serialize_archive: segment " + s.recording_id + " has " +
                            std::to_string(s.values.size()) + " values");
        }
        w.i32(s.label);
        w.u32(static_cast<std::uint32_t>(s.recording_id.size()));
        w.bytes(s.recording_id);
        w.u32(static_cast<std::uint32_t>(s.segment_index));
        for (float v : s.values) w.f32(v);
    }
    const auto& buf = w.buffer();
    w.u64(binio::fnv1a64(buf.data(), buf.size()));
    return w.buffer();
}

SegmentArchive deserialize_archive(const std::vector<std::uint8_t>& bytes,
                                   const std::string& context) {
    if (bytes.size() < 48) throw DataError(context + ": file too short for a segment archive");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= std::uint64_t{bytes[body + i]} << (8 * i);
    if (stored != binio::fnv1a64(bytes.data(), body)) {
        throw DataError(context + ": checksum mismatch (archive corrupted)");
    }
    binio::Reader r(bytes, context);
    if (r.bytes(8) != std::string(kMagic, 8)) throw DataError(context + ": not a segment archive");
    if (auto v = r.u32(); v != kArchiveVersion) {
        throw DataError(context + ": unsupported archive version " + std::to_string(v));
    }
    SegmentArchive a;
    a.pipeline_version = r.u32();
    a.seed = r.u64();
    const auto mels = r.u32(), frames = r.u32();
    if (mels != kMels || frames != kSegmentFrames) {
        throw DataError(context + ": segment geometry " + std::to_string(mels) + "x" +
                        std::to_string(frames) + " is not 128x16");
    }
    const auto n = r.u64();
    a.segments.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        MelSegment s;
        s.label = r.i32();
        s.recording_id = r.bytes(r.u32());
        s.segment_index = static_cast<int>(r.u32());
        s.values.resize(kMels * kSegmentFrames);
        for (auto& v : s.values) v = r.f32();
        a.segments.push_back(std::move(s));
    }
    if (r.position() != body) throw DataError(context + ": trailing bytes after records");
    return a;
}

void save_archive(const std::filesystem::path& path, const SegmentArchive& a) {
    binio::write_file_atomic(path, serialize_archive(a));
}

SegmentArchive load_archive(const std::filesystem::path& path) {
    return deserialize_archive(binio::read_file(path), path.string());
}

std::filesystem::path sidecar_path(const std::filesystem::path& archive) {
    auto p = archive;
    p += ".splits.json";
    return p;
}

void save_splits(const std::filesystem::path& archive, const Splits& s, std::uint64_t seed,
                 std::size_t count, const std::map<int, std::string>& class_names) {
    nlohmann::json j;
    j["archive"] = archive.filename().string();
    j["seed"] = seed;
    j["count"] = count;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    nlohmann::json names = nlohmann::json::object();
    for (const auto& [k, v] : class_names) names[std::to_string(k)] = v;
    j["class_names"] = names;
    binio::write_text_atomic(sidecar_path(archive), j.dump(1) + "\n");
}

Splits load_splits(const std::filesystem::path& archive, std::size_t count) {
    const auto path = sidecar_path(archive);
    auto bytes = binio::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    Splits s;
    std::set<std::size_t> seen;
    try {
        if (j.at("count").get<std::size_t>() != count) {
            throw DataError(path.string() + ": split sidecar describes " +
                            std::to_string(j.at("count").get<std::size_t>()) +
                            " records, archive has " + std::to_string(count));
        }
        for (auto [key, dst] : {std::pair{"train", &s.train}, {"val", &s.val}, {"test", &s.test}}) {
            *dst = j.at(key).get<std::vector<std::size_t>>();
            for (auto i : *dst) {
                if (i >= count) throw DataError(path.string() + ": index out of range in " + key);
                if (!seen.insert(i).second) {
                    throw DataError(path.string() + ": record " + std::to_string(i) +
                                    " appears in more than one split");
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return s;
}

}  // namespace scl::audio

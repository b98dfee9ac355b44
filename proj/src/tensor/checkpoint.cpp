#include "scl/checkpoint.hpp"

#include <algorithm>

#include "scl/binio.hpp"
#include "scl/errors.hpp"

namespace scl {

namespace {
constexpr std::string_view kMagic{"SCLCKPT\0", 8};
}

void Checkpoint::add(std::string name, const Tensor& value) {
    if (contains(name)) throw std::invalid_argument("Checkpoint: duplicate entry '" + name + "'");
    entries_.emplace_back(std::move(name), value.detach());
}

void Checkpoint::add_all(const ParameterList& params, const std::string& prefix) {
    for (const auto& p : params) add(prefix + p.name, p.value);
}

bool Checkpoint::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.first == name) return e.second;
    throw DataError("checkpoint has no entry '" + name + "'");
}

void Checkpoint::load_into(ParameterList& params, const std::string& prefix) const {
    for (auto& p : params) {
        const Tensor& src = get(prefix + p.name);
        if (src.shape() != p.value.shape()) {
            throw DataError("checkpoint entry '" + prefix + p.name + "' has shape " +
                            shape_str(src.shape()) + ", model expects " +
                            shape_str(p.value.shape()));
        }
        std::copy(src.data().begin(), src.data().end(), p.value.data().begin());
    }
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    binio::Writer w;
    w.bytes(kMagic);
    w.u32(meta.format_version);
    nlohmann::json mj = {{"format_version", meta.format_version},
                         {"model_kind", meta.model_kind},
                         {"task_index", meta.task_index},
                         {"seed", meta.seed},
                         {"extra", meta.extra}};
    std::string ms = mj.dump();
    w.u32(static_cast<std::uint32_t>(ms.size()));
    w.bytes(ms);
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(t.ndim()));
        for (auto d : t.shape()) w.u64(d);
        for (double v : t.data()) w.f64(v);
    }
    auto bytes = w.buffer();
    std::uint64_t h = binio::fnv1a64(bytes.data(), bytes.size());
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(h >> (8 * i)));
    return bytes;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes,
                                   const std::string& context) {
    if (bytes.size() < kMagic.size() + 8) throw DataError(context + ": not a checkpoint (too short)");
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    if (binio::fnv1a64(bytes.data(), bytes.size() - 8) != stored) {
        throw DataError(context + ": checksum mismatch (corrupted checkpoint)");
    }
    binio::Reader r(bytes, context);
    if (r.bytes(kMagic.size()) != kMagic) throw DataError(context + ": bad magic");
    Checkpoint c;
    c.meta.format_version = r.u32();
    if (c.meta.format_version != kCheckpointVersion) {
        throw DataError(context + ": unsupported checkpoint version " +
                        std::to_string(c.meta.format_version));
    }
    auto mlen = r.u32();
    try {
        auto mj = nlohmann::json::parse(r.bytes(mlen));
        c.meta.model_kind = mj.at("model_kind").get<std::string>();
        c.meta.task_index = mj.at("task_index").get<int>();
        c.meta.seed = mj.at("seed").get<std::uint64_t>();
        c.meta.extra = mj.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(context + ": bad metadata: " + e.what());
    }
    auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.bytes(r.u32());
        Shape shape(r.u32());
        for (auto& d : shape) d = r.u64();
        std::size_t n = shape_numel(shape);
        if (n * 8 > r.remaining()) throw DataError(context + ": entry '" + name + "' truncated");
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64();
        c.entries_.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    if (r.remaining() != 8) throw DataError(context + ": trailing bytes after entries");
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    binio::write_file_atomic(path, ckpt.serialize());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return Checkpoint::deserialize(binio::read_file(path), path.string());
}

}  // namespace scl

#pragma once

// Little-endian byte encoding shared by the checkpoint and segment-archive
// formats. Values are encoded explicitly byte-by-byte, so output does not
// depend on host endianness.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scl::binio {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; throws DataError mentioning `context` on truncation.
class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, std::string context)
        : buf_(buf), context_(std::move(context)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n);

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    std::uint64_t get(int n);
    const std::vector<std::uint8_t>& buf_;
    std::string context_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes via a sibling temp file + rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace scl::binio

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>

#include "ttm/error.hpp"

// Little-endian byte packing and atomic file I/O shared by the container
// formats. Encoding is explicit per byte so files are identical on any host.
namespace ttm::io {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

inline void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<uint64_t>(v));
}

// Cursor over an in-memory buffer; reads past the end report corruption.
class Reader {
public:
    explicit Reader(std::string_view buf) : buf_(buf) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return buf_.size() - pos_; }

    std::string_view take(size_t n) {
        if (remaining() < n) throw CorruptionError("unexpected end of data");
        std::string_view out = buf_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    uint32_t u32() {
        std::string_view b = take(4);
        return static_cast<uint32_t>(static_cast<unsigned char>(b[0])) |
               static_cast<uint32_t>(static_cast<unsigned char>(b[1])) << 8 |
               static_cast<uint32_t>(static_cast<unsigned char>(b[2])) << 16 |
               static_cast<uint32_t>(static_cast<unsigned char>(b[3])) << 24;
    }

    uint64_t u64() {
        const uint64_t lo = u32();
        const uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    std::string_view buf_;
    size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (f == nullptr) throw IoError("cannot open for reading: " + path.string());
    std::string out;
    char chunk[1 << 16];
    size_t n = 0;
    while ((n = std::fread(chunk, 1, sizeof(chunk), f)) > 0) {
        out.append(chunk, n);
    }
    const bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) throw IoError("read failed: " + path.string());
    return out;
}

// Write via a sibling temp file then rename, so readers never observe a
// partially written artifact.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
    if (f == nullptr) throw IoError("cannot open for writing: " + tmp.string());
    const size_t written = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
    const bool flushed = std::fflush(f) == 0;
    const bool closed = std::fclose(f) == 0;
    if (written != bytes.size() || !flushed || !closed) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("rename failed: " + path.string());
    }
}

} // namespace ttm::io

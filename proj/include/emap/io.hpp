#pragma once

// Shared file helpers: whole-file reads/writes and little-endian binary fields.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emap/error.hpp"

namespace emap::io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string() + " (file not found or unreadable)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed: " + path.string());
}

inline json parse_json(std::string_view bytes, const std::string& what) {
    try {
        return json::parse(bytes);
    } catch (const json::exception& e) {
        throw InputError(what + ": invalid JSON: " + e.what());
    }
}

/// Canonical JSON text: two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline bool is_binary_path(const std::filesystem::path& path) { return path.extension() == ".bin"; }

inline bool has_magic(std::string_view bytes, std::string_view magic) {
    return bytes.size() >= magic.size() && bytes.substr(0, magic.size()) == magic;
}

/// Appends little-endian fields.
class Writer {
public:
    void magic(std::string_view m) { buf_.append(m); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { buf_.append(s); }
    std::string take() { return std::move(buf_); }

private:
    template <class U>
    void put(U v) {
        for (std::size_t k = 0; k < sizeof(U); ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
    }
    std::string buf_;
};

/// Reads little-endian fields; throws InputError on truncation.
class Reader {
public:
    Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    void expect_magic(std::string_view m) {
        if (!has_magic(bytes_.substr(pos_), m)) throw InputError(what_ + ": bad magic, expected " + std::string(m));
        pos_ += m.size();
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get<std::uint8_t>()); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw InputError(what_ + ": truncated binary file");
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    template <class U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t k = 0; k < sizeof(U); ++k)
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k));
        pos_ += sizeof(U);
        return v;
    }
    std::string_view bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace emap::io

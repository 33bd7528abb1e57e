#pragma once

// Internal little-endian stream helpers shared by the file-format readers
// and writers. Readers track the byte offset for error messages.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "eventfly/types.hpp"

namespace eventfly::detail {

class Reader {
public:
    explicit Reader(const std::filesystem::path& path)
        : path_(path.string()), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path_);
    }

    void raw(void* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(path_ + ": truncated " + what + " at byte offset " +
                              std::to_string(offset_));
        offset_ += n;
    }

    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        raw(&v, 1, what);
        return v;
    }
    std::int8_t i8(const char* what) {
        std::int8_t v;
        raw(&v, 1, what);
        return v;
    }
    std::uint16_t u16(const char* what) {
        std::uint8_t b[2];
        raw(b, 2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        std::uint8_t b[4];
        raw(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v = 0;
        std::uint8_t b[8];
        raw(b, 8, what);
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::int64_t i64(const char* what) { return static_cast<std::int64_t>(u64(what)); }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    void expect_magic(const char* magic) {
        char buf[4];
        raw(buf, 4, "magic");
        if (std::memcmp(buf, magic, 4) != 0)
            throw FormatError(path_ + ": bad magic at byte offset 0, expected \"" +
                              std::string(magic) + "\"");
    }

    std::size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& message, std::size_t at) const {
        throw FormatError(path_ + ": " + message + " at byte offset " + std::to_string(at));
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path)
        : path_(path.string()), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path_ + " for writing");
    }

    void raw(const void* src, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void i8(std::int8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
        raw(b, 2);
    }
    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        raw(b, 4);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        raw(b, 8);
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }

    void close() {
        out_.flush();
        if (!out_) throw IoError("write failed for " + path_);
        out_.close();
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace eventfly::detail

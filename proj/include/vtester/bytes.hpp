#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vtester/error.hpp"

namespace vtester {

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16le(uint16_t v) {
        u8(static_cast<uint8_t>(v));
        u8(static_cast<uint8_t>(v >> 8));
    }
    void u32le(uint32_t v) {
        u16le(static_cast<uint16_t>(v));
        u16le(static_cast<uint16_t>(v >> 16));
    }
    void u16be(uint16_t v) {
        u8(static_cast<uint8_t>(v >> 8));
        u8(static_cast<uint8_t>(v));
    }
    void u32be(uint32_t v) {
        u16be(static_cast<uint16_t>(v >> 16));
        u16be(static_cast<uint16_t>(v));
    }
    void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

    size_t size() const { return buf_.size(); }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

/// Bounds-checked cursor; running off the end throws FormatError naming `what`.
class ByteReader {
public:
    ByteReader(std::span<const uint8_t> data, const char* what) : data_(data), what_(what) {}

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16le() {
        auto b = take(2);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32le() {
        auto b = take(4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint16_t u16be() {
        auto b = take(2);
        return static_cast<uint16_t>((b[0] << 8) | b[1]);
    }
    uint32_t u32be() {
        auto b = take(4);
        return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
               (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
    }
    std::span<const uint8_t> bytes(size_t n) { return take(n); }

    size_t remaining() const { return data_.size() - pos_; }
    bool empty() const { return remaining() == 0; }

private:
    std::span<const uint8_t> take(size_t n) {
        if (n > remaining()) throw FormatError(std::string(what_) + ": truncated data");
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::span<const uint8_t> data_;
    size_t pos_ = 0;
    const char* what_;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace vtester

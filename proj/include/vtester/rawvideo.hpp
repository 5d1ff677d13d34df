#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace vtester {

/// One uncompressed I420 picture. Plane sizes always match the geometry.
class FrameBuffer {
public:
    FrameBuffer() = default;
    /// Zero-filled frame; width and height must be even and positive.
    FrameBuffer(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    std::span<uint8_t> y() { return y_; }
    std::span<uint8_t> u() { return u_; }
    std::span<uint8_t> v() { return v_; }
    std::span<const uint8_t> y() const { return y_; }
    std::span<const uint8_t> u() const { return u_; }
    std::span<const uint8_t> v() const { return v_; }

    uint8_t& luma(int x, int row) { return y_[static_cast<size_t>(row) * width_ + x]; }
    uint8_t luma(int x, int row) const { return y_[static_cast<size_t>(row) * width_ + x]; }

    size_t byte_size() const { return y_.size() + u_.size() + v_.size(); }

    /// Planes concatenated Y, U, V.
    std::vector<uint8_t> to_bytes() const;
    void assign_bytes(std::span<const uint8_t> bytes);

    bool operator==(const FrameBuffer&) const = default;

    static size_t i420_size(int width, int height);

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> y_, u_, v_;
};

struct RawVideo {
    int width = 0;
    int height = 0;
    int fps_num = 25;
    int fps_den = 1;
    std::vector<FrameBuffer> frames;

    double fps() const { return static_cast<double>(fps_num) / fps_den; }
    bool operator==(const RawVideo&) const = default;
};

RawVideo read_y4m(std::istream& in);
void write_y4m(std::ostream& out, const RawVideo& video);

RawVideo read_y4m_file(const std::filesystem::path& path);
void write_y4m_file(const std::filesystem::path& path, const RawVideo& video);

/// Synthetic clip: black background with a textured square (side `square`)
/// bouncing `speed` pixels per frame. Deterministic.
RawVideo moving_square(int width, int height, size_t frames, int square = 32, int speed = 3, int fps_num = 25,
                       int fps_den = 1);

}  // namespace vtester

#include "vtester/rawvideo.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "vtester/error.hpp"

namespace vtester {

namespace {

constexpr std::string_view kSignature = "YUV4MPEG2";
constexpr std::string_view kFrameTag = "FRAME";
// Longest header line we are willing to buffer before calling the stream garbage.
constexpr size_t kMaxHeaderLine = 4096;

std::string read_line(std::istream& in, bool& eof_before_any) {
    std::string line;
    eof_before_any = true;
    char c;
    while (in.get(c)) {
        eof_before_any = false;
        if (c == '\n') return line;
        line.push_back(c);
        if (line.size() > kMaxHeaderLine) throw FormatError("y4m: header line too long");
    }
    if (!eof_before_any) throw FormatError("y4m: header line not terminated");
    return line;
}

int parse_int(std::string_view s, const char* what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError(std::string("y4m: bad ") + what + " value '" + std::string(s) + "'");
    return value;
}

bool is_420(std::string_view tag) {
    return tag == "420" || tag == "420jpeg" || tag == "420paldv" || tag == "420mpeg2";
}

}  // namespace

FrameBuffer::FrameBuffer(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0)
        throw FormatError("I420 frame needs even positive dimensions, got " + std::to_string(width) +
                          "x" + std::to_string(height));
    const size_t luma = static_cast<size_t>(width) * height;
    y_.assign(luma, 0);
    u_.assign(luma / 4, 0);
    v_.assign(luma / 4, 0);
}

size_t FrameBuffer::i420_size(int width, int height) {
    const size_t luma = static_cast<size_t>(width) * height;
    return luma + luma / 2;
}

std::vector<uint8_t> FrameBuffer::to_bytes() const {
    std::vector<uint8_t> out;
    out.reserve(byte_size());
    out.insert(out.end(), y_.begin(), y_.end());
    out.insert(out.end(), u_.begin(), u_.end());
    out.insert(out.end(), v_.begin(), v_.end());
    return out;
}

void FrameBuffer::assign_bytes(std::span<const uint8_t> bytes) {
    if (bytes.size() != byte_size())
        throw FormatError("frame byte count " + std::to_string(bytes.size()) + " does not match I420 size " +
                          std::to_string(byte_size()));
    auto it = bytes.begin();
    std::copy_n(it, y_.size(), y_.begin());
    it += static_cast<std::ptrdiff_t>(y_.size());
    std::copy_n(it, u_.size(), u_.begin());
    it += static_cast<std::ptrdiff_t>(u_.size());
    std::copy_n(it, v_.size(), v_.begin());
}

RawVideo read_y4m(std::istream& in) {
    bool eof = false;
    const std::string header = read_line(in, eof);
    if (eof) throw FormatError("y4m: empty stream");
    std::string_view rest(header);
    if (!rest.starts_with(kSignature) || (rest.size() > kSignature.size() && rest[kSignature.size()] != ' '))
        throw FormatError("y4m: missing YUV4MPEG2 signature");
    rest.remove_prefix(kSignature.size());

    RawVideo video;
    bool have_w = false, have_h = false;
    while (!rest.empty()) {
        if (rest.front() == ' ') {
            rest.remove_prefix(1);
            continue;
        }
        const size_t end = std::min(rest.find(' '), rest.size());
        const std::string_view tag = rest.substr(0, end);
        rest.remove_prefix(end);
        const std::string_view value = tag.substr(1);
        switch (tag.front()) {
            case 'W':
                video.width = parse_int(value, "width");
                have_w = true;
                break;
            case 'H':
                video.height = parse_int(value, "height");
                have_h = true;
                break;
            case 'F': {
                const size_t colon = value.find(':');
                if (colon == std::string_view::npos) throw FormatError("y4m: frame rate must be num:den");
                video.fps_num = parse_int(value.substr(0, colon), "frame rate");
                video.fps_den = parse_int(value.substr(colon + 1), "frame rate");
                if (video.fps_num <= 0 || video.fps_den <= 0)
                    throw FormatError("y4m: frame rate terms must be positive");
                break;
            }
            case 'C':
                if (!is_420(value)) throw FormatError("y4m: unsupported colourspace C" + std::string(value));
                break;
            default:
                break;  // I, A, X and anything else: ignored.
        }
    }
    if (!have_w || !have_h) throw FormatError("y4m: header lacks W or H");
    FrameBuffer blank(video.width, video.height);  // validates geometry

    const size_t frame_bytes = FrameBuffer::i420_size(video.width, video.height);
    std::vector<uint8_t> buffer(frame_bytes);
    for (;;) {
        const std::string line = read_line(in, eof);
        if (eof) break;
        if (!std::string_view(line).starts_with(kFrameTag)) throw FormatError("y4m: expected FRAME marker");
        in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(frame_bytes));
        if (static_cast<size_t>(in.gcount()) != frame_bytes)
            throw FormatError("y4m: truncated frame " + std::to_string(video.frames.size()));
        FrameBuffer frame = blank;
        frame.assign_bytes(buffer);
        video.frames.push_back(std::move(frame));
    }
    return video;
}

void write_y4m(std::ostream& out, const RawVideo& video) {
    out << kSignature << " W" << video.width << " H" << video.height << " F" << video.fps_num << ':'
        << video.fps_den << " Ip A1:1 C420\n";
    for (const FrameBuffer& frame : video.frames) {
        if (frame.width() != video.width || frame.height() != video.height)
            throw FormatError("y4m: frame geometry differs from video geometry");
        out << kFrameTag << '\n';
        for (auto plane : {frame.y(), frame.u(), frame.v()})
            out.write(reinterpret_cast<const char*>(plane.data()), static_cast<std::streamsize>(plane.size()));
    }
    if (!out) throw Error("y4m: write failed");
}

RawVideo read_y4m_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read_y4m(in);
}

void write_y4m_file(const std::filesystem::path& path, const RawVideo& video) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot create " + path.string());
    write_y4m(out, video);
}

namespace {

// Position on a 0..span-1 ping-pong path.
int bounce(int64_t t, int span) {
    if (span <= 0) return 0;
    const int64_t period = 2 * static_cast<int64_t>(span);
    const int64_t m = t % period;
    return static_cast<int>(m <= span ? m : period - m);
}

}  // namespace

RawVideo moving_square(int width, int height, size_t frames, int square, int speed, int fps_num, int fps_den) {
    if (square < 2 || square % 2 != 0 || square > width || square > height)
        throw Error("moving_square: square side must be even and fit the frame");
    RawVideo video;
    video.width = width;
    video.height = height;
    video.fps_num = fps_num;
    video.fps_den = fps_den;
    video.frames.reserve(frames);
    for (size_t n = 0; n < frames; ++n) {
        FrameBuffer f(width, height);
        const int64_t t = static_cast<int64_t>(n) * speed;
        const int x0 = bounce(t, width - square) & ~1;
        const int y0 = bounce(t / 2, height - square) & ~1;
        for (int r = 0; r < square; ++r)
            for (int c = 0; c < square; ++c)
                f.luma(x0 + c, y0 + r) = static_cast<uint8_t>(64 + ((c * 7 + r * 13) % 160));
        const int cw = width / 2;
        for (int r = 0; r < square / 2; ++r)
            for (int c = 0; c < square / 2; ++c) {
                const size_t i = static_cast<size_t>(y0 / 2 + r) * cw + static_cast<size_t>(x0 / 2 + c);
                f.u()[i] = 90;
                f.v()[i] = 200;
            }
        video.frames.push_back(std::move(f));
    }
    return video;
}

}  // namespace vtester

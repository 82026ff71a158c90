#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mritherm/errors.hpp"

namespace mritherm {

/// 8-bit image, 1 (gray) or 3 (RGB) channels, row-major, channel-interleaved.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    ImageU8() = default;
    ImageU8(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1) throw ShapeError("image extents must be >= 1");
        if (c != 1 && c != 3) throw ShapeError("image channels must be 1 or 3");
    }

    std::uint8_t at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const ImageU8& o) const {
        return width == o.width && height == o.height && channels == o.channels && data == o.data;
    }
};

namespace imgio {

namespace detail {

// PNM header tokens may be separated by any whitespace; '#' starts a comment
// that runs to end of line.
inline int next_header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    auto is_space = [](std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    };
    while (pos < bytes.size()) {
        if (is_space(bytes[pos])) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
        throw FormatError("pnm: expected integer in header");
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        value = value * 10 + (bytes[pos] - '0');
        if (value > 1 << 30) throw FormatError("pnm: header value out of range");
        ++pos;
    }
    return static_cast<int>(value);
}

}  // namespace detail

/// Binary PGM (P5) or PPM (P6), maxval 255 only.
inline ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("pnm: bad magic, want P5 or P6");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    const int width = detail::next_header_int(bytes, pos);
    const int height = detail::next_header_int(bytes, pos);
    const int maxval = detail::next_header_int(bytes, pos);
    if (width < 1 || height < 1) throw FormatError("pnm: bad dimensions");
    if (maxval != 255) throw FormatError("pnm: maxval must be 255, got " + std::to_string(maxval));
    if (pos >= bytes.size()) throw FormatError("pnm: truncated after header");
    ++pos;  // single whitespace byte before payload
    const std::size_t need = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - pos < need) throw FormatError("pnm: truncated payload");
    ImageU8 img(width, height, channels);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
              bytes.begin() + static_cast<std::ptrdiff_t>(pos + need), img.data.begin());
    return img;
}

inline std::vector<std::uint8_t> encode_pnm(const ImageU8& img) {
    std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

inline ImageU8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open output file: " + path);
    auto bytes = encode_pnm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace imgio
}  // namespace mritherm

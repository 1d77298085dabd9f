#include "sgdf/data/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sgdf::data {

namespace {

int next_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then parses one non-negative integer.
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF) throw std::runtime_error("pnm: unexpected end of header");
    int value = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        any = true;
        ch = in.get();
    }
    if (!any) throw std::runtime_error("pnm: malformed header token");
    return value;
}

}  // namespace

Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pnm: cannot open " + path);
    char p = 0, n = 0;
    in.get(p);
    in.get(n);
    if (p != 'P' || (n != '5' && n != '6'))
        throw std::runtime_error("pnm: " + path + " is not a binary PGM/PPM file");
    const int channels = (n == '5') ? 1 : 3;
    const int w = next_pnm_token(in);
    const int h = next_pnm_token(in);
    const int maxval = next_pnm_token(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("pnm: bad dimensions/maxval in " + path);

    const std::size_t count = static_cast<std::size_t>(w) * h * channels;
    Image img(h, w, channels);
    if (maxval < 256) {
        std::vector<std::uint8_t> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
        if (!in) throw std::runtime_error("pnm: truncated pixel data in " + path);
        for (std::size_t i = 0; i < count; ++i)
            img[i] = static_cast<float>(buf[i]) / static_cast<float>(maxval);
    } else {
        std::vector<std::uint8_t> buf(count * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 2));
        if (!in) throw std::runtime_error("pnm: truncated pixel data in " + path);
        for (std::size_t i = 0; i < count; ++i) {
            // 16-bit PNM samples are big-endian.
            const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
            img[i] = static_cast<float>(v) / static_cast<float>(maxval);
        }
    }
    return img;
}

void write_pnm(const std::string& path, const Image& img, int bit_depth) {
    if (img.c() != 1 && img.c() != 3)
        throw std::invalid_argument("pnm: only 1- or 3-channel images, got " + img.shape().str());
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("pnm: bit depth must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pnm: cannot write " + path);
    const int maxval = (bit_depth == 8) ? 255 : 65535;
    out << (img.c() == 1 ? "P5" : "P6") << "\n"
        << img.w() << " " << img.h() << "\n"
        << maxval << "\n";
    const std::size_t count = img.size();
    auto quantize = [&](float x) -> unsigned {
        const double v = std::min(1.0, std::max(0.0, static_cast<double>(x)));
        return static_cast<unsigned>(std::lround(v * maxval));
    };
    if (bit_depth == 8) {
        std::vector<std::uint8_t> buf(count);
        for (std::size_t i = 0; i < count; ++i) buf[i] = static_cast<std::uint8_t>(quantize(img[i]));
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(count));
    } else {
        std::vector<std::uint8_t> buf(count * 2);
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned v = quantize(img[i]);
            buf[2 * i] = static_cast<std::uint8_t>(v >> 8);
            buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(count * 2));
    }
    if (!out) throw std::runtime_error("pnm: write failed for " + path);
}

}  // namespace sgdf::data

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/tensor.hpp"

namespace fadml {

// Binary PPM (P6, maxval <= 255). The only image format the lab needs: it is
// what GTSRB ships and it is trivial to emit for visual inspection.

namespace detail {

inline int ppm_next_token(std::istream& in, std::string& tok, const std::string& path) {
    tok.clear();
    int c = in.get();
    // skip whitespace and '#' comments
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = in.get();
        c = in.get();
    }
    if (c == EOF) throw codec_error("ppm: truncated header in " + path);
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return c;
}

}  // namespace detail

// values scaled to [0,1]; always returns a {3,h,w} tensor
inline tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("ppm: cannot open " + path);
    std::string tok;
    detail::ppm_next_token(in, tok, path);
    if (tok != "P6") throw codec_error("ppm: " + path + " is not a binary P6 file (got '" +
                                       tok + "')");
    long w = 0, h = 0, maxval = 0;
    try {
        detail::ppm_next_token(in, tok, path);
        w = std::stol(tok);
        detail::ppm_next_token(in, tok, path);
        h = std::stol(tok);
        detail::ppm_next_token(in, tok, path);
        maxval = std::stol(tok);
    } catch (const std::exception&) {
        throw codec_error("ppm: malformed header in " + path);
    }
    if (w < 1 || h < 1) throw codec_error("ppm: bad dimensions in " + path);
    if (maxval < 1 || maxval > 255)
        throw codec_error("ppm: unsupported maxval " + std::to_string(maxval) + " in " + path);
    // header ends with exactly one whitespace byte, already consumed by the
    // maxval token read
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw codec_error("ppm: truncated pixel data in " + path);
    tensor out({3, static_cast<int>(h), static_cast<int>(w)});
    const float inv = 1.0f / static_cast<float>(maxval);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] * inv;
    return out;
}

// accepts {3,h,w} or {1,h,w} (grayscale replicated); values clamped to [0,1]
inline void write_ppm(const std::string& path, const tensor& img) {
    if (img.shape().size() != 3 || (img.shape()[0] != 3 && img.shape()[0] != 1))
        throw input_error("ppm: tensor must be {3,h,w} or {1,h,w}, got " +
                          tensor::shape_str(img.shape()));
    const int ch = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("ppm: cannot write " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = img.at(ch == 3 ? c : 0, y, x);
                v = std::min(1.0f, std::max(0.0f, v));
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw io_error("ppm: write failed for " + path);
}

}  // namespace fadml

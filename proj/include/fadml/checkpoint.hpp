#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/net.hpp"

namespace fadml {

// Checkpoint container, version 1. Little-endian throughout; the round trip
// is bit-exact. Layout (see README for the field-by-field description):
//
//   "FADM"                       4 bytes magic
//   u16 version (= 1)
//   u16 reserved (= 0)
//   u32 input ndim, then u32 per dim
//   u32 num_classes
//   u32 num_layers
//   per layer: u8 kind, u32 p0..p4   (conv: out_c,kernel,stride,pad,-;
//                                     maxpool: window,stride,-;
//                                     dense: out_units,-; else zeros)
//   per conv/dense layer, in order: raw f32 weights then bias
inline constexpr char checkpoint_magic[4] = {'F', 'A', 'D', 'M'};
inline constexpr std::uint16_t checkpoint_version = 1;

namespace detail {

inline void put_u16(std::ostream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2)
        throw checkpoint_error(checkpoint_error::kind::truncated, "checkpoint: truncated file");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw checkpoint_error(checkpoint_error::kind::truncated, "checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace detail

inline void save_checkpoint(const network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("checkpoint: cannot write " + path);
    out.write(checkpoint_magic, 4);
    detail::put_u16(out, checkpoint_version);
    detail::put_u16(out, 0);
    detail::put_u32(out, static_cast<std::uint32_t>(net.input_shape().size()));
    for (int d : net.input_shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    detail::put_u32(out, static_cast<std::uint32_t>(net.num_classes()));
    detail::put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const layer& l : net.layers()) {
        const unsigned char kind = static_cast<unsigned char>(l.kind);
        out.write(reinterpret_cast<const char*>(&kind), 1);
        std::uint32_t p[5] = {0, 0, 0, 0, 0};
        switch (l.kind) {
            case layer_kind::conv2d:
                p[0] = l.out_channels;
                p[1] = l.kernel;
                p[2] = l.stride;
                p[3] = l.pad;
                break;
            case layer_kind::maxpool:
                p[0] = l.window;
                p[1] = l.pool_stride;
                break;
            case layer_kind::dense: p[0] = l.out_units; break;
            default: break;
        }
        for (std::uint32_t v : p) detail::put_u32(out, v);
    }
    for (const layer& l : net.layers()) {
        if (!l.has_params()) continue;
        for (std::size_t i = 0; i < l.weights.size(); ++i) detail::put_f32(out, l.weights[i]);
        for (std::size_t i = 0; i < l.bias.size(); ++i) detail::put_f32(out, l.bias[i]);
    }
    if (!out) throw io_error("checkpoint: write failed for " + path);
}

inline network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4)
        throw checkpoint_error(checkpoint_error::kind::truncated, "checkpoint: truncated file");
    if (std::string(magic, 4) != std::string(checkpoint_magic, 4))
        throw checkpoint_error(checkpoint_error::kind::bad_magic,
                               "checkpoint: bad magic in " + path);
    const std::uint16_t version = detail::get_u16(in);
    if (version != checkpoint_version)
        throw checkpoint_error(checkpoint_error::kind::bad_version,
                               "checkpoint: unsupported version " + std::to_string(version));
    detail::get_u16(in);  // reserved
    const std::uint32_t ndim = detail::get_u32(in);
    if (ndim == 0 || ndim > 4)
        throw checkpoint_error(checkpoint_error::kind::malformed,
                               "checkpoint: implausible input rank " + std::to_string(ndim));
    std::vector<int> input_shape(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i)
        input_shape[i] = static_cast<int>(detail::get_u32(in));
    const std::uint32_t num_classes = detail::get_u32(in);
    const std::uint32_t num_layers = detail::get_u32(in);
    if (num_layers > 1024)
        throw checkpoint_error(checkpoint_error::kind::malformed,
                               "checkpoint: implausible layer count");

    network net(input_shape);
    try {
        for (std::uint32_t li = 0; li < num_layers; ++li) {
            unsigned char kind;
            in.read(reinterpret_cast<char*>(&kind), 1);
            if (in.gcount() != 1)
                throw checkpoint_error(checkpoint_error::kind::truncated,
                                       "checkpoint: truncated layer table");
            std::uint32_t p[5];
            for (auto& v : p) v = detail::get_u32(in);
            switch (static_cast<layer_kind>(kind)) {
                case layer_kind::conv2d:
                    net.conv2d(static_cast<int>(p[0]), static_cast<int>(p[1]),
                               static_cast<int>(p[2]), static_cast<int>(p[3]));
                    break;
                case layer_kind::relu: net.relu(); break;
                case layer_kind::maxpool:
                    net.maxpool(static_cast<int>(p[0]), static_cast<int>(p[1]));
                    break;
                case layer_kind::dense: net.dense(static_cast<int>(p[0])); break;
                case layer_kind::softmax: net.softmax(); break;
                default:
                    throw checkpoint_error(checkpoint_error::kind::malformed,
                                           "checkpoint: unknown layer kind " +
                                               std::to_string(int(kind)));
            }
        }
    } catch (const config_error& e) {
        throw checkpoint_error(checkpoint_error::kind::malformed,
                               std::string("checkpoint: inconsistent layer table: ") + e.what());
    }
    if (!net.finalized() || net.num_classes() != static_cast<int>(num_classes))
        throw checkpoint_error(checkpoint_error::kind::malformed,
                               "checkpoint: class count does not match layer table");
    for (layer& l : net.layers()) {
        if (!l.has_params()) continue;
        for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] = detail::get_f32(in);
        for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = detail::get_f32(in);
    }
    return net;
}

}  // namespace fadml

// Test-only reference implementations, independent of the library's forward
// and backward paths: a straight-line double-precision network evaluator, a
// central-difference gradient, a dense filter matrix built from the neighbor
// definitions, and a classic perceptron used to certify linear separability.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fadml/filters.hpp"
#include "fadml/net.hpp"
#include "fadml/tensor.hpp"

namespace oracle {

using fadml::layer_kind;
using fadml::network;
using fadml::tensor;

// forward pass with every intermediate carried in double
inline std::vector<double> ref_forward(const network& net, const std::vector<double>& x_in) {
    std::vector<double> cur = x_in;
    std::vector<int> shape = net.input_shape();
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        const fadml::layer& l = net.layers()[li];
        switch (l.kind) {
            case layer_kind::conv2d: {
                const int ic = shape[0], h = shape[1], w = shape[2];
                const int k = l.kernel, s = l.stride, p = l.pad;
                const int oc = l.out_channels;
                const int oh = (h + 2 * p - k) / s + 1, ow = (w + 2 * p - k) / s + 1;
                std::vector<double> out(static_cast<std::size_t>(oc) * oh * ow);
                for (int o = 0; o < oc; ++o)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            double acc = l.bias[o];
                            for (int c = 0; c < ic; ++c)
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int iy = oy * s + ky - p;
                                        const int ix = ox * s + kx - p;
                                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                        acc += static_cast<double>(
                                                   l.weights[((static_cast<std::size_t>(o) * ic +
                                                               c) * k + ky) * k + kx]) *
                                               cur[(static_cast<std::size_t>(c) * h + iy) * w + ix];
                                    }
                            out[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
                        }
                cur = std::move(out);
                shape = {oc, oh, ow};
                break;
            }
            case layer_kind::relu:
                for (double& v : cur) v = v > 0.0 ? v : 0.0;
                break;
            case layer_kind::maxpool: {
                const int c = shape[0], h = shape[1], w = shape[2];
                const int win = l.window, s = l.pool_stride;
                const int oh = (h - win) / s + 1, ow = (w - win) / s + 1;
                std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            double best = -1e300;
                            for (int dy = 0; dy < win; ++dy)
                                for (int dx = 0; dx < win; ++dx)
                                    best = std::max(
                                        best, cur[(static_cast<std::size_t>(ch) * h + oy * s + dy) *
                                                      w +
                                                  ox * s + dx]);
                            out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] = best;
                        }
                cur = std::move(out);
                shape = {c, oh, ow};
                break;
            }
            case layer_kind::dense: {
                const int n_out = l.weights.shape()[0], n_in = l.weights.shape()[1];
                std::vector<double> out(n_out);
                for (int o = 0; o < n_out; ++o) {
                    double acc = l.bias[o];
                    for (int i = 0; i < n_in; ++i)
                        acc += static_cast<double>(
                                   l.weights[static_cast<std::size_t>(o) * n_in + i]) *
                               cur[i];
                    out[o] = acc;
                }
                cur = std::move(out);
                shape = {n_out};
                break;
            }
            case layer_kind::softmax: {
                const double m = *std::max_element(cur.begin(), cur.end());
                double sum = 0.0;
                for (double& v : cur) {
                    v = std::exp(v - m);
                    sum += v;
                }
                for (double& v : cur) v /= sum;
                break;
            }
        }
    }
    return cur;
}

inline std::vector<double> to_doubles(const tensor& t) {
    return std::vector<double>(t.buffer().begin(), t.buffer().end());
}

inline double ref_loss(const network& net, const std::vector<double>& x, int target) {
    return -std::log(ref_forward(net, x)[target] + 1e-12);
}

// central finite differences of the double-precision loss
inline tensor fd_input_gradient(const network& net, const tensor& x, int target,
                                double h = 1e-3) {
    std::vector<double> xd = to_doubles(x);
    tensor g(x.shape());
    for (std::size_t i = 0; i < xd.size(); ++i) {
        const double keep = xd[i];
        xd[i] = keep + h;
        const double lp = ref_loss(net, xd, target);
        xd[i] = keep - h;
        const double lm = ref_loss(net, xd, target);
        xd[i] = keep;
        g[i] = static_cast<float>((lp - lm) / (2.0 * h));
    }
    return g;
}

// dense averaging matrix (one channel plane) assembled from the filter
// definitions: LAP takes the np+1 nearest offsets with row-major tie-breaks,
// LAR the full disk; off-image neighbors clamp to the border.
inline std::vector<std::vector<double>> dense_filter_matrix(const fadml::filter_config& cfg,
                                                            int h, int w) {
    std::vector<std::pair<int, int>> offsets;
    if (cfg.kind == fadml::filter_kind::identity) {
        offsets = {{0, 0}};
    } else if (cfg.kind == fadml::filter_kind::lar) {
        for (int dy = -cfg.r; dy <= cfg.r; ++dy)
            for (int dx = -cfg.r; dx <= cfg.r; ++dx)
                if (dy * dy + dx * dx <= cfg.r * cfg.r) offsets.emplace_back(dy, dx);
    } else {
        std::vector<std::pair<int, int>> cand;
        for (int dy = -16; dy <= 16; ++dy)
            for (int dx = -16; dx <= 16; ++dx) cand.emplace_back(dy, dx);
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            const int da = a.first * a.first + a.second * a.second;
            const int db = b.first * b.first + b.second * b.second;
            return da != db ? da < db : a < b;
        });
        offsets.assign(cand.begin(), cand.begin() + cfg.np + 1);
    }
    const double weight = 1.0 / offsets.size();
    std::vector<std::vector<double>> m(static_cast<std::size_t>(h) * w,
                                       std::vector<double>(static_cast<std::size_t>(h) * w, 0.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (const auto& [dy, dx] : offsets) {
                const int sy = std::clamp(y + dy, 0, h - 1);
                const int sx = std::clamp(x + dx, 0, w - 1);
                m[static_cast<std::size_t>(y) * w + x][static_cast<std::size_t>(sy) * w + sx] +=
                    weight;
            }
    return m;
}

// classic perceptron; returns true if it reaches zero training errors, which
// certifies the data is linearly separable
inline bool perceptron_separable(const std::vector<std::vector<double>>& xs,
                                 const std::vector<int>& labels, int max_epochs = 2000) {
    const std::size_t dim = xs[0].size();
    std::vector<double> w(dim + 1, 0.0);
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        int errors = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double act = w[dim];
            for (std::size_t d = 0; d < dim; ++d) act += w[d] * xs[i][d];
            const int pred = act > 0.0 ? 1 : 0;
            if (pred != labels[i]) {
                ++errors;
                const double delta = labels[i] == 1 ? 1.0 : -1.0;
                for (std::size_t d = 0; d < dim; ++d) w[d] += delta * xs[i][d];
                w[dim] += delta;
            }
        }
        if (errors == 0) return true;
    }
    return false;
}

// anisotropic total variation of a {c,h,w} tensor
inline double total_variation(const tensor& t) {
    const int c = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
    double tv = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (x + 1 < w) tv += std::fabs(t.at(ch, y, x + 1) - t.at(ch, y, x));
                if (y + 1 < h) tv += std::fabs(t.at(ch, y + 1, x) - t.at(ch, y, x));
            }
    return tv;
}

}  // namespace oracle

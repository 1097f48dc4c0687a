#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/parallel.hpp"
#include "fadml/rng.hpp"
#include "fadml/tensor.hpp"

namespace fadml {

enum class layer_kind : std::uint8_t { conv2d = 0, relu = 1, maxpool = 2, dense = 3, softmax = 4 };

inline const char* layer_kind_name(layer_kind k) {
    switch (k) {
        case layer_kind::conv2d: return "conv2d";
        case layer_kind::relu: return "relu";
        case layer_kind::maxpool: return "maxpool";
        case layer_kind::dense: return "dense";
        case layer_kind::softmax: return "softmax";
    }
    return "?";
}

struct layer {
    layer_kind kind;
    int out_channels = 0, kernel = 0, stride = 1, pad = 0;  // conv2d
    int window = 0, pool_stride = 0;                        // maxpool
    int out_units = 0;                                      // dense
    tensor weights;  // conv: {oc,ic,k,k}; dense: {out,in}
    tensor bias;     // conv: {oc}; dense: {out}

    bool has_params() const {
        return kind == layer_kind::conv2d || kind == layer_kind::dense;
    }
};

// Class probabilities from one forward pass.
struct prediction {
    std::vector<float> probabilities;

    // (class-id, probability) pairs, descending by probability; equal
    // probabilities are ordered by ascending class-id so the ranking is total.
    std::vector<std::pair<int, float>> top_k(int k) const {
        std::vector<int> idx(probabilities.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return probabilities[a] > probabilities[b]; });
        const int n = std::min<int>(k, static_cast<int>(idx.size()));
        std::vector<std::pair<int, float>> out;
        out.reserve(n);
        for (int i = 0; i < n; ++i) out.emplace_back(idx[i], probabilities[idx[i]]);
        return out;
    }

    int top1() const { return top_k(1)[0].first; }
    float top1_confidence() const { return top_k(1)[0].second; }
};

// Ordered layer stack with shape inference at build time. Construction is a
// fluent chain; the stack is usable once softmax() has been added.
class network {
public:
    explicit network(std::vector<int> input_shape) : input_shape_(std::move(input_shape)) {
        for (int d : input_shape_)
            if (d < 1) throw config_error("network: input dimensions must be >= 1");
        shapes_.push_back(input_shape_);
    }

    network() = default;

    network& conv2d(int out_channels, int kernel, int stride = 1, int pad = 0,
                    const std::string& where = {}) {
        require_open(where);
        const std::vector<int>& in = shapes_.back();
        if (in.size() != 3)
            throw config_error(ctx(where) + "conv2d requires a {c,h,w} input, got " +
                               tensor::shape_str(in));
        if (out_channels < 1 || kernel < 1 || stride < 1 || pad < 0)
            throw config_error(ctx(where) + "conv2d: bad hyper-parameters");
        const int h = in[1], w = in[2];
        const int oh = (h + 2 * pad - kernel) / stride + 1;
        const int ow = (w + 2 * pad - kernel) / stride + 1;
        if (h + 2 * pad < kernel || w + 2 * pad < kernel || oh < 1 || ow < 1)
            throw config_error(ctx(where) + "conv2d: kernel " + std::to_string(kernel) +
                               " does not fit input " + tensor::shape_str(in));
        layer l;
        l.kind = layer_kind::conv2d;
        l.out_channels = out_channels;
        l.kernel = kernel;
        l.stride = stride;
        l.pad = pad;
        l.weights = tensor({out_channels, in[0], kernel, kernel});
        l.bias = tensor({out_channels});
        layers_.push_back(std::move(l));
        shapes_.push_back({out_channels, oh, ow});
        return *this;
    }

    network& relu() {
        require_open({});
        layer l;
        l.kind = layer_kind::relu;
        layers_.push_back(std::move(l));
        shapes_.push_back(shapes_.back());
        return *this;
    }

    network& maxpool(int window, int stride, const std::string& where = {}) {
        require_open(where);
        const std::vector<int>& in = shapes_.back();
        if (in.size() != 3)
            throw config_error(ctx(where) + "maxpool requires a {c,h,w} input");
        if (window < 1 || stride < 1) throw config_error(ctx(where) + "maxpool: bad window/stride");
        const int h = in[1], w = in[2];
        if (h < window || w < window)
            throw config_error(ctx(where) + "maxpool: window " + std::to_string(window) +
                               " exceeds spatial size " + tensor::shape_str(in));
        layer l;
        l.kind = layer_kind::maxpool;
        l.window = window;
        l.pool_stride = stride;
        layers_.push_back(std::move(l));
        shapes_.push_back({in[0], (h - window) / stride + 1, (w - window) / stride + 1});
        return *this;
    }

    network& dense(int out_units, const std::string& where = {}) {
        require_open(where);
        if (out_units < 1) throw config_error(ctx(where) + "dense: out_units must be >= 1");
        std::size_t in_units = 1;
        for (int d : shapes_.back()) in_units *= static_cast<std::size_t>(d);
        layer l;
        l.kind = layer_kind::dense;
        l.out_units = out_units;
        l.weights = tensor({out_units, static_cast<int>(in_units)});
        l.bias = tensor({out_units});
        layers_.push_back(std::move(l));
        shapes_.push_back({out_units});
        return *this;
    }

    network& softmax() {
        require_open({});
        const std::vector<int>& in = shapes_.back();
        if (in.size() != 1)
            throw config_error("softmax requires a flat input, got " + tensor::shape_str(in));
        if (in[0] < 2) throw config_error("softmax: needs at least 2 classes");
        layer l;
        l.kind = layer_kind::softmax;
        layers_.push_back(std::move(l));
        shapes_.push_back(in);
        num_classes_ = in[0];
        return *this;
    }

    // uniform(-s, s) with s = scale / sqrt(fan_in); biases start at zero
    void init_weights(std::uint64_t seed, float scale = 1.0f) {
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            layer& l = layers_[li];
            if (!l.has_params()) continue;
            const int fan_in = l.kind == layer_kind::conv2d
                                   ? shapes_[li][0] * l.kernel * l.kernel
                                   : l.weights.shape()[1];
            const float s = scale / std::sqrt(static_cast<float>(fan_in));
            rng r(derive_seed(seed, static_cast<std::uint64_t>(li)));
            for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] = r.uniform(-s, s);
            l.bias.fill(0.0f);
        }
    }

    bool finalized() const { return num_classes_ > 0; }
    int num_classes() const { return num_classes_; }
    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<layer>& layers() const { return layers_; }
    std::vector<layer>& layers() { return layers_; }
    // shape before layer i is layer_shapes()[i]; [layers().size()] is the output
    const std::vector<std::vector<int>>& layer_shapes() const { return shapes_; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const layer& l : layers_) n += l.weights.size() + l.bias.size();
        return n;
    }

    bool params_finite() const {
        for (const layer& l : layers_)
            if (l.weights.has_nan() || l.bias.has_nan()) return false;
        return true;
    }

private:
    static std::string ctx(const std::string& where) {
        return where.empty() ? std::string() : where + ": ";
    }

    void require_open(const std::string& where) const {
        if (finalized()) throw config_error(ctx(where) + "network already ends in softmax");
        if (shapes_.empty()) throw config_error("network: missing input shape");
    }

    std::vector<int> input_shape_;
    int num_classes_ = 0;
    std::vector<layer> layers_;
    std::vector<std::vector<int>> shapes_;
};

// Five conv blocks (out-channels 64/128/256/512/512 divided by width_divisor,
// floor 4), 3x3 stride-1 pad-1 convs each followed by relu, 2x2 maxpool after
// blocks 1-4, then a single dense layer into softmax.
inline network build_vgg_mini(std::vector<int> input_shape, int num_classes, int width_divisor,
                              std::uint64_t seed = 0, float weight_init_scale = 1.0f) {
    if (width_divisor != 1 && width_divisor != 2 && width_divisor != 4 && width_divisor != 8 &&
        width_divisor != 16)
        throw config_error("vgg-mini: width_divisor must be one of {1,2,4,8,16}");
    if (input_shape.size() != 3)
        throw config_error("vgg-mini: input shape must be {channels,height,width}");
    if (input_shape[1] < 16 || input_shape[2] < 16)
        throw config_error("vgg-mini: input spatial size must be at least 16x16, got " +
                           tensor::shape_str(input_shape));
    if (num_classes < 6) throw config_error("vgg-mini: num_classes must be >= 6");

    const int base[5] = {64, 128, 256, 512, 512};
    network net(std::move(input_shape));
    for (int b = 0; b < 5; ++b) {
        const std::string where = "vgg-mini block " + std::to_string(b + 1);
        const int oc = std::max(4, base[b] / width_divisor);
        net.conv2d(oc, 3, 1, 1, where).relu();
        if (b < 4) net.maxpool(2, 2, where);
    }
    net.dense(num_classes, "vgg-mini dense").softmax();
    net.init_weights(seed, weight_init_scale);
    return net;
}

namespace detail {

struct forward_trace {
    std::vector<tensor> acts;                 // acts[0] = input, acts[i+1] = output of layer i
    std::vector<std::vector<int>> pool_argmax;  // per layer; empty unless maxpool
};

inline void conv2d_forward(const layer& l, const tensor& x, tensor& out) {
    const int ic = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const int oc = out.shape()[0], oh = out.shape()[1], ow = out.shape()[2];
    const int k = l.kernel, s = l.stride, p = l.pad;
    const float* xd = x.data();
    float* od = out.data();
    for (int o = 0; o < oc; ++o) {
        float* oplane = od + static_cast<std::size_t>(o) * oh * ow;
        std::fill(oplane, oplane + static_cast<std::size_t>(oh) * ow, l.bias[o]);
        for (int c = 0; c < ic; ++c) {
            const float* xplane = xd + static_cast<std::size_t>(c) * h * w;
            const float* wbase = l.weights.data() +
                                 (static_cast<std::size_t>(o) * ic + c) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const float wv = wbase[ky * k + kx];
                    if (wv == 0.0f) continue;
                    // output rows/cols whose source index stays inside the image
                    int oy0 = 0, oy1 = oh - 1;
                    while (oy0 * s + ky - p < 0) ++oy0;
                    while (oy1 >= 0 && oy1 * s + ky - p > h - 1) --oy1;
                    int ox0 = 0, ox1 = ow - 1;
                    while (ox0 * s + kx - p < 0) ++ox0;
                    while (ox1 >= 0 && ox1 * s + kx - p > w - 1) --ox1;
                    for (int oy = oy0; oy <= oy1; ++oy) {
                        const float* xrow = xplane + static_cast<std::size_t>(oy * s + ky - p) * w;
                        float* orow = oplane + static_cast<std::size_t>(oy) * ow;
                        if (s == 1) {
                            const float* xp = xrow + (ox0 + kx - p);
                            for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += wv * xp[ox - ox0];
                        } else {
                            for (int ox = ox0; ox <= ox1; ++ox)
                                orow[ox] += wv * xrow[ox * s + kx - p];
                        }
                    }
                }
            }
        }
    }
}

// accumulates into dx (scatter in fixed loop order); dw/db optional
inline void conv2d_backward(const layer& l, const tensor& x, const tensor& gout, tensor* dx,
                            tensor* dw, tensor* db) {
    const int ic = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const int oc = gout.shape()[0], oh = gout.shape()[1], ow = gout.shape()[2];
    const int k = l.kernel, s = l.stride, p = l.pad;
    const float* gd = gout.data();
    for (int o = 0; o < oc; ++o) {
        const float* gplane = gd + static_cast<std::size_t>(o) * oh * ow;
        if (db) {
            float acc = 0.0f;
            for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += gplane[i];
            (*db)[o] += acc;
        }
        for (int c = 0; c < ic; ++c) {
            const float* xplane = x.data() + static_cast<std::size_t>(c) * h * w;
            const std::size_t wbase = (static_cast<std::size_t>(o) * ic + c) * k * k;
            float* dxplane = dx ? dx->data() + static_cast<std::size_t>(c) * h * w : nullptr;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int oy0 = 0, oy1 = oh - 1;
                    while (oy0 * s + ky - p < 0) ++oy0;
                    while (oy1 >= 0 && oy1 * s + ky - p > h - 1) --oy1;
                    int ox0 = 0, ox1 = ow - 1;
                    while (ox0 * s + kx - p < 0) ++ox0;
                    while (ox1 >= 0 && ox1 * s + kx - p > w - 1) --ox1;
                    const float wv = l.weights[wbase + ky * k + kx];
                    float wacc = 0.0f;
                    for (int oy = oy0; oy <= oy1; ++oy) {
                        const float* grow = gplane + static_cast<std::size_t>(oy) * ow;
                        const std::size_t xoff = static_cast<std::size_t>(oy * s + ky - p) * w;
                        for (int ox = ox0; ox <= ox1; ++ox) {
                            const std::size_t xi = xoff + ox * s + kx - p;
                            if (dw) wacc += grow[ox] * xplane[xi];
                            if (dxplane) dxplane[xi] += grow[ox] * wv;
                        }
                    }
                    if (dw) (*dw)[wbase + ky * k + kx] += wacc;
                }
            }
        }
    }
}

inline void maxpool_forward(const layer& l, const tensor& x, tensor& out,
                            std::vector<int>* argmax) {
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const int oh = out.shape()[1], ow = out.shape()[2];
    const int win = l.window, s = l.pool_stride;
    if (argmax) argmax->assign(out.size(), 0);
    for (int ch = 0; ch < c; ++ch) {
        const float* xplane = x.data() + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                // first maximum in scan order wins, keeping backward routing total
                float best = xplane[static_cast<std::size_t>(oy * s) * w + ox * s];
                int best_i = oy * s * w + ox * s;
                for (int dy = 0; dy < win; ++dy) {
                    for (int dxx = 0; dxx < win; ++dxx) {
                        const int i = (oy * s + dy) * w + (ox * s + dxx);
                        if (xplane[i] > best) {
                            best = xplane[i];
                            best_i = i;
                        }
                    }
                }
                const std::size_t oi = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
                out[oi] = best;
                if (argmax) (*argmax)[oi] = best_i;
            }
        }
    }
}

inline void dense_forward(const layer& l, const tensor& x, tensor& out) {
    const int n_out = l.weights.shape()[0];
    const int n_in = l.weights.shape()[1];
    const float* xd = x.data();
    for (int o = 0; o < n_out; ++o) {
        const float* wrow = l.weights.data() + static_cast<std::size_t>(o) * n_in;
        float acc = l.bias[o];
        for (int i = 0; i < n_in; ++i) acc += wrow[i] * xd[i];
        out[o] = acc;
    }
}

inline void softmax_forward(const tensor& x, tensor& out) {
    float m = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, x[i]);
    float sum = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        sum += out[i];
    }
    const float inv = 1.0f / sum;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
}

inline void forward_with_trace(const network& net, const tensor& x, forward_trace& tr) {
    if (x.shape() != net.input_shape())
        throw input_error("forward: input shape " + tensor::shape_str(x.shape()) +
                          " does not match network input " +
                          tensor::shape_str(net.input_shape()));
    if (!net.finalized()) throw config_error("forward: network has no softmax head");
    const auto& layers = net.layers();
    tr.acts.clear();
    tr.acts.reserve(layers.size() + 1);
    tr.pool_argmax.assign(layers.size(), {});
    tr.acts.push_back(x);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const layer& l = layers[li];
        const std::vector<int>& out_shape = net.layer_shapes()[li + 1];
        tensor out(out_shape);
        const tensor& in = tr.acts.back();
        switch (l.kind) {
            case layer_kind::conv2d: conv2d_forward(l, in, out); break;
            case layer_kind::relu:
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
                break;
            case layer_kind::maxpool: maxpool_forward(l, in, out, &tr.pool_argmax[li]); break;
            case layer_kind::dense: {
                // dense consumes the flattened view of whatever comes in
                tensor flat({static_cast<int>(in.size())}, in.buffer());
                dense_forward(l, flat, out);
                break;
            }
            case layer_kind::softmax: softmax_forward(in, out); break;
        }
        if (out.has_nan())
            throw numeric_error("forward: NaN/Inf in activations at layer " + std::to_string(li) +
                                " (" + std::string(layer_kind_name(l.kind)) + ")");
        tr.acts.push_back(std::move(out));
    }
}

struct param_grads {
    std::vector<tensor> w, b;  // aligned with network.layers(); empty for layers without params

    void init_like(const network& net) {
        w.resize(net.layers().size());
        b.resize(net.layers().size());
        for (std::size_t i = 0; i < net.layers().size(); ++i) {
            const layer& l = net.layers()[i];
            if (!l.has_params()) continue;
            w[i] = tensor(l.weights.shape());
            b[i] = tensor(l.bias.shape());
        }
    }

    void accumulate(const param_grads& o) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i].empty()) continue;
            w[i] += o.w[i];
            b[i] += o.b[i];
        }
    }
};

// Backward pass from the cross-entropy loss -log(p[target] + eps) through
// every layer. Writes the gradient w.r.t. the input into x_grad; accumulates
// parameter gradients into pg when given.
inline void backward(const network& net, const forward_trace& tr, int target, tensor& x_grad,
                     param_grads* pg) {
    constexpr float eps_stab = 1e-12f;
    const auto& layers = net.layers();
    const tensor& probs = tr.acts.back();

    // dL/dp: nonzero only at the target class
    tensor grad(probs.shape());
    grad[target] = -1.0f / (probs[target] + eps_stab);

    for (std::size_t li = layers.size(); li-- > 0;) {
        const layer& l = layers[li];
        const tensor& in = tr.acts[li];
        const tensor& out = tr.acts[li + 1];
        tensor gin(in.shape());
        switch (l.kind) {
            case layer_kind::softmax: {
                float dot = 0.0f;
                for (std::size_t i = 0; i < out.size(); ++i) dot += grad[i] * out[i];
                for (std::size_t i = 0; i < out.size(); ++i)
                    gin[i] = out[i] * (grad[i] - dot);
                break;
            }
            case layer_kind::dense: {
                const int n_out = l.weights.shape()[0];
                const int n_in = l.weights.shape()[1];
                for (int o = 0; o < n_out; ++o) {
                    const float g = grad[o];
                    const float* wrow = l.weights.data() + static_cast<std::size_t>(o) * n_in;
                    float* gi = gin.data();
                    if (g != 0.0f)
                        for (int i = 0; i < n_in; ++i) gi[i] += g * wrow[i];
                    if (pg) {
                        float* dwrow = pg->w[li].data() + static_cast<std::size_t>(o) * n_in;
                        const float* xi = in.data();
                        if (g != 0.0f)
                            for (int i = 0; i < n_in; ++i) dwrow[i] += g * xi[i];
                        pg->b[li][o] += g;
                    }
                }
                break;
            }
            case layer_kind::relu:
                for (std::size_t i = 0; i < in.size(); ++i)
                    gin[i] = in[i] > 0.0f ? grad[i] : 0.0f;
                break;
            case layer_kind::maxpool: {
                const int c = in.shape()[0], h = in.shape()[1], w = in.shape()[2];
                const int oh = out.shape()[1], ow = out.shape()[2];
                const std::vector<int>& am = tr.pool_argmax[li];
                for (int ch = 0; ch < c; ++ch) {
                    float* gplane = gin.data() + static_cast<std::size_t>(ch) * h * w;
                    const std::size_t obase = static_cast<std::size_t>(ch) * oh * ow;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i)
                        gplane[am[obase + i]] += grad[obase + i];
                }
                break;
            }
            case layer_kind::conv2d:
                conv2d_backward(l, in, grad, &gin, pg ? &pg->w[li] : nullptr,
                                pg ? &pg->b[li] : nullptr);
                break;
        }
        grad = std::move(gin);
    }
    x_grad = std::move(grad);
}

}  // namespace detail

inline prediction forward(const network& net, const tensor& x) {
    detail::forward_trace tr;
    detail::forward_with_trace(net, x, tr);
    return prediction{tr.acts.back().buffer()};
}

// cross-entropy toward target_class: -log(p[target] + 1e-12)
inline float loss(const network& net, const tensor& x, int target_class) {
    if (target_class < 0 || target_class >= net.num_classes())
        throw input_error("loss: class id " + std::to_string(target_class) + " out of range");
    const prediction p = forward(net, x);
    return static_cast<float>(
        -std::log(static_cast<double>(p.probabilities[target_class]) + 1e-12));
}

struct grad_result {
    prediction pred;
    float loss_value;
    tensor x_grad;
};

// one forward + backward pass; reused by attacks that need the prediction,
// loss and gradient together
inline grad_result input_gradient_ex(const network& net, const tensor& x, int target_class) {
    if (target_class < 0 || target_class >= net.num_classes())
        throw input_error("input_gradient: class id " + std::to_string(target_class) +
                          " out of range");
    detail::forward_trace tr;
    detail::forward_with_trace(net, x, tr);
    grad_result r;
    r.pred.probabilities = tr.acts.back().buffer();
    r.loss_value = static_cast<float>(
        -std::log(static_cast<double>(r.pred.probabilities[target_class]) + 1e-12));
    detail::backward(net, tr, target_class, r.x_grad, nullptr);
    return r;
}

inline tensor input_gradient(const network& net, const tensor& x, int target_class) {
    return input_gradient_ex(net, x, target_class).x_grad;
}

struct eval_result {
    prediction pred;
    float loss_value;
};

// prediction and loss from a single forward pass
inline eval_result predict_and_loss(const network& net, const tensor& x, int target_class) {
    eval_result r;
    r.pred = forward(net, x);
    r.loss_value = static_cast<float>(
        -std::log(static_cast<double>(r.pred.probabilities[target_class]) + 1e-12));
    return r;
}

struct train_config {
    float learning_rate = 0.05f;
    int epochs = 10;
    int batch_size = 32;
    std::uint64_t seed = 0;
    float weight_init_scale = 1.0f;

    void validate() const {
        if (!(learning_rate > 0.0f)) throw config_error("train: learning_rate must be > 0");
        if (epochs < 1) throw config_error("train: epochs must be >= 1");
        if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
        if (!(weight_init_scale > 0.0f))
            throw config_error("train: weight_init_scale must be > 0");
    }
};

struct epoch_stats {
    int epoch;
    float mean_loss;
    float accuracy;
};

struct train_result {
    network net;
    std::vector<epoch_stats> trace;
};

// Plain SGD on cross-entropy. Deterministic for a given (seed, config, data):
// shuffle order comes from our own engine, and per-sample gradients are
// reduced in sample order no matter how many worker threads computed them.
inline train_result train(network net, const std::vector<tensor>& images,
                          const std::vector<int>& labels, const train_config& cfg,
                          int threads = 1) {
    cfg.validate();
    if (images.empty()) throw input_error("train: empty dataset");
    if (images.size() != labels.size())
        throw input_error("train: images/labels size mismatch");
    for (int l : labels)
        if (l < 0 || l >= net.num_classes())
            throw input_error("train: label " + std::to_string(l) + " out of range");

    const std::size_t n = images.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    train_result res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng shuffle_rng(derive_seed(cfg.seed, 0x5eedULL, static_cast<std::uint64_t>(epoch)));
        deterministic_shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bn = std::min<std::size_t>(cfg.batch_size, n - start);
            std::vector<detail::param_grads> slots(bn);
            std::vector<float> losses(bn);
            std::vector<int> top1s(bn);
            try {
                detail::parallel_for(bn, threads, [&](std::size_t bi) {
                    const std::size_t si = order[start + bi];
                    detail::forward_trace tr;
                    detail::forward_with_trace(net, images[si], tr);
                    const tensor& probs = tr.acts.back();
                    losses[bi] = static_cast<float>(
                        -std::log(static_cast<double>(probs[labels[si]]) + 1e-12));
                    int best = 0;
                    for (std::size_t c = 1; c < probs.size(); ++c)
                        if (probs[c] > probs[best]) best = static_cast<int>(c);
                    top1s[bi] = best;
                    slots[bi].init_like(net);
                    tensor unused;
                    detail::backward(net, tr, labels[si], unused, &slots[bi]);
                });
            } catch (const numeric_error& e) {
                throw training_error(
                    "train: divergence at epoch " + std::to_string(epoch) + ": " + e.what(),
                    epoch);
            }
            detail::param_grads batch;
            batch.init_like(net);
            for (std::size_t bi = 0; bi < bn; ++bi) {
                batch.accumulate(slots[bi]);
                loss_sum += losses[bi];
                if (top1s[bi] == labels[order[start + bi]]) ++correct;
            }
            const float scale = cfg.learning_rate / static_cast<float>(bn);
            for (std::size_t li = 0; li < net.layers().size(); ++li) {
                layer& l = net.layers()[li];
                if (!l.has_params()) continue;
                for (std::size_t i = 0; i < l.weights.size(); ++i)
                    l.weights[i] -= scale * batch.w[li][i];
                for (std::size_t i = 0; i < l.bias.size(); ++i)
                    l.bias[i] -= scale * batch.b[li][i];
            }
            if (std::isnan(loss_sum) || !net.params_finite())
                throw training_error("train: divergence (NaN) at epoch " + std::to_string(epoch),
                                     epoch);
        }
        res.trace.push_back({epoch, static_cast<float>(loss_sum / n),
                             static_cast<float>(correct) / static_cast<float>(n)});
    }
    res.net = std::move(net);
    return res;
}

}  // namespace fadml

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/tensor.hpp"

namespace fadml {

enum class filter_kind : std::uint8_t { identity = 0, lap = 1, lar = 2 };

// Pre-processing smoothing filter configuration. LAP averages a pixel with
// its np nearest grid neighbors; LAR averages over the disk of radius r.
// Boundary handling is always replicate. The usual sweep values are
// np in {4,8,16,32,64} and r in {1..5}; other positive values work but are
// flagged as non-canonical so reports can mark exploratory runs.
struct filter_config {
    filter_kind kind = filter_kind::identity;
    int np = 0;  // lap only
    int r = 0;   // lar only

    void validate() const {
        switch (kind) {
            case filter_kind::identity:
                if (np != 0 || r != 0)
                    throw config_error("filter: identity takes no np/r parameter");
                break;
            case filter_kind::lap:
                if (np < 1) throw config_error("filter: lap requires np >= 1");
                if (r != 0) throw config_error("filter: lap takes np, not r");
                break;
            case filter_kind::lar:
                if (r < 1) throw config_error("filter: lar requires r >= 1");
                if (np != 0) throw config_error("filter: lar takes r, not np");
                break;
        }
    }

    bool canonical() const {
        switch (kind) {
            case filter_kind::identity: return true;
            case filter_kind::lap:
                return np == 4 || np == 8 || np == 16 || np == 32 || np == 64;
            case filter_kind::lar: return r >= 1 && r <= 5;
        }
        return false;
    }

    std::string label() const {
        switch (kind) {
            case filter_kind::identity: return "identity";
            case filter_kind::lap: return "lap:" + std::to_string(np);
            case filter_kind::lar: return "lar:" + std::to_string(r);
        }
        return "?";
    }

    std::string kind_name() const {
        switch (kind) {
            case filter_kind::identity: return "identity";
            case filter_kind::lap: return "lap";
            case filter_kind::lar: return "lar";
        }
        return "?";
    }

    int param() const { return kind == filter_kind::lap ? np : kind == filter_kind::lar ? r : 0; }

    // "identity", "lap:16", "lar:3"
    static filter_config parse(const std::string& text) {
        filter_config cfg;
        const auto colon = text.find(':');
        const std::string name = text.substr(0, colon);
        int value = 0;
        if (colon != std::string::npos) {
            try {
                value = std::stoi(text.substr(colon + 1));
            } catch (const std::exception&) {
                throw config_error("filter: bad parameter in '" + text + "'");
            }
        }
        if (name == "identity") {
            cfg.kind = filter_kind::identity;
            if (colon != std::string::npos)
                throw config_error("filter: identity takes no parameter");
        } else if (name == "lap") {
            cfg.kind = filter_kind::lap;
            cfg.np = value;
        } else if (name == "lar") {
            cfg.kind = filter_kind::lar;
            cfg.r = value;
        } else {
            throw config_error("filter: unknown kind '" + name + "'");
        }
        cfg.validate();
        return cfg;
    }

    bool operator==(const filter_config&) const = default;
};

inline std::vector<filter_config> default_filter_sweep() {
    std::vector<filter_config> out;
    out.push_back({filter_kind::identity, 0, 0});
    for (int np : {4, 8, 16, 32, 64}) out.push_back({filter_kind::lap, np, 0});
    for (int r = 1; r <= 5; ++r) out.push_back({filter_kind::lar, 0, r});
    return out;
}

// Row-stochastic linear averaging operator, precomputed for one image shape
// so sweeps can apply it thousands of times. Acts per channel; the adjoint is
// the exact transpose of the same weight table.
class linear_filter {
public:
    linear_filter(filter_config cfg, std::vector<int> image_shape)
        : cfg_(cfg), shape_(std::move(image_shape)) {
        cfg_.validate();
        if (shape_.size() != 3)
            throw input_error("filter: image shape must be {c,h,w}, got " +
                              tensor::shape_str(shape_));
        const int h = shape_[1], w = shape_[2];
        if (h < 1 || w < 1) throw input_error("filter: empty spatial dimensions");

        const std::vector<std::pair<int, int>> offsets = neighbor_offsets(cfg_);
        const float weight = 1.0f / static_cast<float>(offsets.size());
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        row_ptr_.reserve(plane + 1);
        row_ptr_.push_back(0);
        src_.reserve(plane * offsets.size());
        wgt_.reserve(plane * offsets.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (const auto& [dy, dx] : offsets) {
                    const int sy = std::clamp(y + dy, 0, h - 1);
                    const int sx = std::clamp(x + dx, 0, w - 1);
                    src_.push_back(sy * w + sx);
                    wgt_.push_back(weight);
                }
                row_ptr_.push_back(static_cast<int>(src_.size()));
            }
        }
    }

    const filter_config& config() const { return cfg_; }
    const std::vector<int>& image_shape() const { return shape_; }

    bool is_identity() const { return cfg_.kind == filter_kind::identity; }

    tensor apply(const tensor& x) const {
        require_shape(x);
        if (is_identity()) return x;
        tensor out(shape_);
        const int c = shape_[0];
        const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
        for (int ch = 0; ch < c; ++ch) {
            const float* xp = x.data() + ch * plane;
            float* op = out.data() + ch * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                double acc = 0.0;
                for (int i = row_ptr_[p]; i < row_ptr_[p + 1]; ++i)
                    acc += static_cast<double>(wgt_[i]) * xp[src_[i]];
                op[p] = static_cast<float>(acc);
            }
        }
        return out;
    }

    // F^T g: pulls a gradient back through apply
    tensor adjoint_apply(const tensor& g) const {
        require_shape(g);
        if (is_identity()) return g;
        tensor out(shape_);
        const int c = shape_[0];
        const std::size_t plane = static_cast<std::size_t>(shape_[1]) * shape_[2];
        std::vector<double> acc(plane);
        for (int ch = 0; ch < c; ++ch) {
            const float* gp = g.data() + ch * plane;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < plane; ++p)
                for (int i = row_ptr_[p]; i < row_ptr_[p + 1]; ++i)
                    acc[src_[i]] += static_cast<double>(wgt_[i]) * gp[p];
            float* op = out.data() + ch * plane;
            for (std::size_t p = 0; p < plane; ++p) op[p] = static_cast<float>(acc[p]);
        }
        return out;
    }

    // per-output-pixel weight list, exposed for verification
    std::size_t weights_per_pixel(std::size_t p) const {
        return static_cast<std::size_t>(row_ptr_[p + 1] - row_ptr_[p]);
    }
    float weight_sum(std::size_t p) const {
        float s = 0.0f;
        for (int i = row_ptr_[p]; i < row_ptr_[p + 1]; ++i) s += wgt_[i];
        return s;
    }

    // Neighbor geometry (position-independent offsets). LAP takes the np+1
    // grid points nearest to the center (center first: distance 0), sorted by
    // squared distance with ties in row-major order. LAR takes every point
    // with squared distance <= r^2.
    static std::vector<std::pair<int, int>> neighbor_offsets(const filter_config& cfg) {
        if (cfg.kind == filter_kind::identity) return {{0, 0}};
        if (cfg.kind == filter_kind::lar) {
            std::vector<std::pair<int, int>> out;
            for (int dy = -cfg.r; dy <= cfg.r; ++dy)
                for (int dx = -cfg.r; dx <= cfg.r; ++dx)
                    if (dy * dy + dx * dx <= cfg.r * cfg.r) out.emplace_back(dy, dx);
            return out;
        }
        // lap: enumerate a window guaranteed to contain the np+1 nearest points
        const int R = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.np) + 1))) + 1;
        std::vector<std::pair<int, int>> cand;
        cand.reserve(static_cast<std::size_t>(2 * R + 1) * (2 * R + 1));
        for (int dy = -R; dy <= R; ++dy)
            for (int dx = -R; dx <= R; ++dx) cand.emplace_back(dy, dx);
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            const int da = a.first * a.first + a.second * a.second;
            const int db = b.first * b.first + b.second * b.second;
            if (da != db) return da < db;
            return a < b;  // row-major tie-break
        });
        cand.resize(static_cast<std::size_t>(cfg.np) + 1);
        return cand;
    }

private:
    void require_shape(const tensor& t) const {
        if (t.shape() != shape_)
            throw input_error("filter: tensor shape " + tensor::shape_str(t.shape()) +
                              " does not match filter shape " + tensor::shape_str(shape_));
    }

    filter_config cfg_;
    std::vector<int> shape_;
    std::vector<int> row_ptr_;
    std::vector<int> src_;
    std::vector<float> wgt_;
};

inline linear_filter build_filter(const filter_config& cfg, std::vector<int> image_shape) {
    return linear_filter(cfg, std::move(image_shape));
}

}  // namespace fadml

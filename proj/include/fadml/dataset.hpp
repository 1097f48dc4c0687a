#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/net.hpp"
#include "fadml/ppm.hpp"
#include "fadml/rng.hpp"
#include "fadml/tensor.hpp"

namespace fadml {

struct labeled_dataset {
    std::vector<tensor> images;  // uniform shape, values in [0,1]
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::string split;  // "train" or "test"

    std::size_t size() const { return images.size(); }

    void validate() const {
        if (images.size() != labels.size())
            throw input_error("dataset: images/labels size mismatch");
        for (int l : labels)
            if (l < 0 || l >= static_cast<int>(class_names.size()))
                throw input_error("dataset: label out of range");
    }

    int class_id(const std::string& name) const {
        for (std::size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return static_cast<int>(i);
        throw config_error("dataset: unknown class name '" + name + "'");
    }
};

inline train_result train(network net, const labeled_dataset& data, const train_config& cfg,
                          int threads = 1) {
    data.validate();
    return train(std::move(net), data.images, data.labels, cfg, threads);
}

namespace detail {

struct rgb {
    float r, g, b;
};

inline constexpr rgb sign_red{0.78f, 0.10f, 0.10f};
inline constexpr rgb sign_white{0.94f, 0.94f, 0.94f};
inline constexpr rgb sign_black{0.06f, 0.06f, 0.06f};
inline constexpr rgb sign_blue{0.12f, 0.28f, 0.78f};
inline constexpr rgb sign_yellow{0.88f, 0.78f, 0.12f};

inline bool in_disc(float u, float v, float rad) { return u * u + v * v <= rad * rad; }

// regular n-gon with circumradius rad, rotated by phi (flat edges when
// phi picks a vertex off-axis)
inline bool in_polygon(float u, float v, int n, float rad, float phi) {
    const float d = std::sqrt(u * u + v * v);
    if (d < 1e-6f) return true;
    float a = std::atan2(v, u) - phi;
    const float sector = 2.0f * static_cast<float>(M_PI) / n;
    a = std::fmod(std::fmod(a, sector) + sector, sector) - sector / 2.0f;
    return d * std::cos(a) <= rad * std::cos(sector / 2.0f);
}

inline bool in_bar(float u, float v, float cv, float half_h, float half_w) {
    return std::fabs(v - cv) <= half_h && std::fabs(u) <= half_w;
}

// left-pointing arrow centered near the origin
inline bool in_arrow(float u, float v) {
    if (std::fabs(v) <= 0.13f && u >= -0.12f && u <= 0.62f) return true;  // shaft
    if (u >= -0.66f && u <= -0.10f)                                       // head, apex at the left
        return std::fabs(v) <= 0.40f * (u + 0.66f) / 0.56f;
    return false;
}

// Glyph color at glyph-local coordinates (u,v), both in roughly [-1,1];
// nullopt means background. Classes 1..3 differ only in the number of
// interior bars, which is what makes heavy smoothing genuinely destructive.
inline std::optional<rgb> glyph_color(int cls, float u, float v) {
    switch (cls) {
        case 0:  // stop: red octagon with a white band
            if (!in_polygon(u, v, 8, 0.95f, static_cast<float>(M_PI) / 8.0f)) return std::nullopt;
            if (in_bar(u, v, 0.0f, 0.16f, 0.58f)) return sign_white;
            return sign_red;
        case 1:  // limit-30: red ring, one black bar
        case 2:  // limit-60: two bars
        case 3: {  // limit-80: three bars
            if (!in_disc(u, v, 0.95f)) return std::nullopt;
            if (!in_disc(u, v, 0.68f)) return sign_red;
            const int bars = cls;
            for (int b = 0; b < bars; ++b) {
                const float cv = (bars == 1) ? 0.0f : -0.38f + 0.38f * b;
                if (in_bar(u, v, cv, 0.10f, 0.42f)) return sign_black;
            }
            return sign_white;
        }
        case 4:  // turn-left: blue disc, white arrow
            if (!in_disc(u, v, 0.95f)) return std::nullopt;
            if (in_arrow(u, v)) return sign_white;
            return sign_blue;
        case 5:  // turn-right: mirrored arrow
            if (!in_disc(u, v, 0.95f)) return std::nullopt;
            if (in_arrow(-u, v)) return sign_white;
            return sign_blue;
        case 6:  // no-entry: red disc, wide white bar
            if (!in_disc(u, v, 0.95f)) return std::nullopt;
            if (in_bar(u, v, 0.0f, 0.20f, 0.64f)) return sign_white;
            return sign_red;
        case 7: {  // warning: red-bordered yellow triangle, black tick
            const float phi = -static_cast<float>(M_PI) / 2.0f;  // apex up
            if (!in_polygon(u, v, 3, 1.05f, phi)) return std::nullopt;
            if (!in_polygon(u * 1.45f, (v - 0.18f) * 1.45f, 3, 1.05f, phi)) return sign_red;
            if (std::fabs(u) <= 0.10f && v >= -0.15f && v <= 0.45f) return sign_black;
            return sign_yellow;
        }
        case 8:  // square: blue square, white inset
            if (std::fabs(u) > 0.80f || std::fabs(v) > 0.80f) return std::nullopt;
            if (std::fabs(u) <= 0.42f && std::fabs(v) <= 0.42f) return sign_white;
            return sign_blue;
        case 9:  // diamond: yellow diamond, black dot
            if (std::fabs(u) + std::fabs(v) > 1.0f) return std::nullopt;
            if (in_disc(u, v, 0.26f)) return sign_black;
            return sign_yellow;
        default: return std::nullopt;
    }
}

inline tensor render_sign(int cls, int image_size, rng& r) {
    // seeded jitter: position +-10% of the image, scale +-15%, rotation +-10deg
    const float tx = r.uniform(-0.20f, 0.20f);
    const float ty = r.uniform(-0.20f, 0.20f);
    const float scale = r.uniform(0.85f, 1.15f);
    const float rot = r.uniform(-10.0f, 10.0f) * static_cast<float>(M_PI) / 180.0f;
    const float brightness = r.uniform(0.88f, 1.12f);
    const float bg = r.uniform(0.30f, 0.62f);

    const float cr = std::cos(rot), sr = std::sin(rot);
    tensor img({3, image_size, image_size});
    const float inv = 2.0f / static_cast<float>(image_size);
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            float acc[3] = {0, 0, 0};
            for (int sy = 0; sy < 2; ++sy) {
                for (int sx = 0; sx < 2; ++sx) {
                    // centered coords in [-1,1], then undo the pose
                    const float px = (x + 0.25f + 0.5f * sx) * inv - 1.0f - tx;
                    const float py = (y + 0.25f + 0.5f * sy) * inv - 1.0f - ty;
                    const float gu = (cr * px + sr * py) / (0.82f * scale);
                    const float gv = (-sr * px + cr * py) / (0.82f * scale);
                    const std::optional<rgb> c = glyph_color(cls, gu, gv);
                    acc[0] += c ? c->r * brightness : bg;
                    acc[1] += c ? c->g * brightness : bg;
                    acc[2] += c ? c->b * brightness : bg;
                }
            }
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = acc[c] * 0.25f;
        }
    }
    // sensor-style noise over the whole frame
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = std::min(1.0f, std::max(0.0f, img[i] + static_cast<float>(r.gaussian(0.0, 0.05))));
    return img;
}

}  // namespace detail

inline const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {
        "stop",      "limit-30", "limit-60", "limit-80", "turn-left",
        "turn-right", "no-entry", "warning",  "square",   "diamond"};
    return names;
}

// Deterministic synthetic traffic-sign-style dataset; stands in for a real
// sign benchmark at desk scale. Returns {train, test} with an exact 80/20
// per-class split.
inline std::pair<labeled_dataset, labeled_dataset> generate_synthetic_signs(
    int num_classes, int per_class, int image_size, std::uint64_t seed) {
    if (num_classes < 6) throw config_error("synthetic signs: num_classes must be >= 6");
    if (num_classes > 10)
        throw config_error("synthetic signs: only 10 glyph classes are available");
    if (per_class < 10) throw config_error("synthetic signs: per_class must be >= 10");
    if (image_size < 16) throw config_error("synthetic signs: image_size must be >= 16");

    labeled_dataset train_ds, test_ds;
    train_ds.split = "train";
    test_ds.split = "test";
    const auto& all_names = synthetic_class_names();
    train_ds.class_names.assign(all_names.begin(), all_names.begin() + num_classes);
    test_ds.class_names = train_ds.class_names;

    const int train_per_class = (per_class * 8) / 10;
    for (int cls = 0; cls < num_classes; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            rng r(derive_seed(seed, static_cast<std::uint64_t>(cls),
                              static_cast<std::uint64_t>(i)));
            tensor img = detail::render_sign(cls, image_size, r);
            labeled_dataset& dst = i < train_per_class ? train_ds : test_ds;
            dst.images.push_back(std::move(img));
            dst.labels.push_back(cls);
        }
    }
    return {std::move(train_ds), std::move(test_ds)};
}

// corner-aligned bilinear resize of a {c,h,w} tensor
inline tensor resize_bilinear(const tensor& src, int out_h, int out_w) {
    const int c = src.shape()[0], h = src.shape()[1], w = src.shape()[2];
    tensor out({c, out_h, out_w});
    const float sy = out_h > 1 ? static_cast<float>(h - 1) / (out_h - 1) : 0.0f;
    const float sx = out_w > 1 ? static_cast<float>(w - 1) / (out_w - 1) : 0.0f;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const float fy = out_h > 1 ? y * sy : (h - 1) * 0.5f;
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, h - 1);
            const float wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const float fx = out_w > 1 ? x * sx : (w - 1) * 0.5f;
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, w - 1);
                const float wx = fx - x0;
                const float v00 = src.at(ch, y0, x0), v01 = src.at(ch, y0, x1);
                const float v10 = src.at(ch, y1, x0), v11 = src.at(ch, y1, x1);
                out.at(ch, y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                   wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

struct load_summary {
    int csv_rows = 0;
    int images_loaded = 0;
    int ppm_files_discovered = 0;
    int class_count = 0;
};

// Loads a directory laid out like the public GTSRB training set: one
// subdirectory per class holding P6 images plus a semicolon-separated
// annotation CSV (header Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;
// ClassId). ROI bounds are inclusive pixel coordinates.
inline labeled_dataset load_gtsrb_format(const std::string& dir_path, int image_size,
                                         load_summary* summary = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir_path))
        throw ingest_error("gtsrb: '" + dir_path + "' is not a directory");

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(dir_path))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw ingest_error("gtsrb: no class subdirectories under " + dir_path);

    labeled_dataset ds;
    ds.split = "test";
    load_summary local;
    int max_class = -1;

    for (const fs::path& cdir : class_dirs) {
        std::vector<fs::path> csvs;
        for (const auto& e : fs::directory_iterator(cdir)) {
            if (!e.is_regular_file()) continue;
            if (e.path().extension() == ".csv") csvs.push_back(e.path());
            if (e.path().extension() == ".ppm") ++local.ppm_files_discovered;
        }
        std::sort(csvs.begin(), csvs.end());
        if (csvs.empty())
            throw ingest_error("gtsrb: no annotation csv in " + cdir.string());
        for (const fs::path& csv : csvs) {
            std::ifstream in(csv);
            if (!in) throw ingest_error("gtsrb: cannot open " + csv.string());
            std::string line;
            int lineno = 0;
            if (!std::getline(in, line))
                throw ingest_error("gtsrb: empty annotation file " + csv.string());
            ++lineno;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty() || line == "\r") continue;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                std::vector<std::string> f;
                std::stringstream ss(line);
                std::string cell;
                while (std::getline(ss, cell, ';')) f.push_back(cell);
                if (f.size() < 8)
                    throw ingest_error("gtsrb: malformed row at " + csv.string() + ":" +
                                       std::to_string(lineno));
                int roi_x1, roi_y1, roi_x2, roi_y2, class_id;
                try {
                    roi_x1 = std::stoi(f[3]);
                    roi_y1 = std::stoi(f[4]);
                    roi_x2 = std::stoi(f[5]);
                    roi_y2 = std::stoi(f[6]);
                    class_id = std::stoi(f[7]);
                } catch (const std::exception&) {
                    throw ingest_error("gtsrb: non-numeric field at " + csv.string() + ":" +
                                       std::to_string(lineno));
                }
                ++local.csv_rows;
                const fs::path img_path = cdir / f[0];
                tensor img = read_ppm(img_path.string());
                const int h = img.shape()[1], w = img.shape()[2];
                if (roi_x1 < 0 || roi_y1 < 0 || roi_x2 < roi_x1 || roi_y2 < roi_y1 ||
                    roi_x2 >= w || roi_y2 >= h)
                    throw ingest_error("gtsrb: bad ROI at " + csv.string() + ":" +
                                       std::to_string(lineno));
                if (class_id < 0)
                    throw ingest_error("gtsrb: negative class id at " + csv.string() + ":" +
                                       std::to_string(lineno));
                tensor crop({3, roi_y2 - roi_y1 + 1, roi_x2 - roi_x1 + 1});
                for (int c = 0; c < 3; ++c)
                    for (int y = roi_y1; y <= roi_y2; ++y)
                        for (int x = roi_x1; x <= roi_x2; ++x)
                            crop.at(c, y - roi_y1, x - roi_x1) = img.at(c, y, x);
                ds.images.push_back(resize_bilinear(crop, image_size, image_size));
                ds.labels.push_back(class_id);
                max_class = std::max(max_class, class_id);
                ++local.images_loaded;
            }
        }
    }
    if (ds.images.empty()) throw ingest_error("gtsrb: no images loaded from " + dir_path);
    for (int c = 0; c <= max_class; ++c) ds.class_names.push_back("class-" + std::to_string(c));
    local.class_count = max_class + 1;
    if (summary) *summary = local;
    return ds;
}

// Dataset cache: a directory of PPMs plus labels.csv (filename,label) and a
// classes.txt with one class name per line.
inline void save_dataset_cache(const labeled_dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream labels(fs::path(dir) / "labels.csv");
    if (!labels) throw io_error("dataset cache: cannot write labels.csv in " + dir);
    labels << "filename,label\n";
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%06zu.ppm", i);
        write_ppm((fs::path(dir) / name).string(), ds.images[i]);
        labels << name << "," << ds.labels[i] << "\n";
    }
    std::ofstream classes(fs::path(dir) / "classes.txt");
    for (const std::string& n : ds.class_names) classes << n << "\n";
}

inline labeled_dataset load_dataset_cache(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream labels(fs::path(dir) / "labels.csv");
    if (!labels) throw ingest_error("dataset cache: missing labels.csv in " + dir);
    labeled_dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(labels, line)) {
        ++lineno;
        if (line.empty() || line == "filename,label") continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw ingest_error("dataset cache: malformed labels.csv line " +
                               std::to_string(lineno));
        int label;
        try {
            label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ingest_error("dataset cache: bad label at labels.csv line " +
                               std::to_string(lineno));
        }
        ds.images.push_back(read_ppm((fs::path(dir) / line.substr(0, comma)).string()));
        ds.labels.push_back(label);
    }
    if (ds.images.empty()) throw ingest_error("dataset cache: empty labels.csv in " + dir);
    std::ifstream classes(fs::path(dir) / "classes.txt");
    while (std::getline(classes, line))
        if (!line.empty()) ds.class_names.push_back(line);
    if (ds.class_names.empty()) {
        int max_label = 0;
        for (int l : ds.labels) max_label = std::max(max_label, l);
        for (int c = 0; c <= max_label; ++c)
            ds.class_names.push_back("class-" + std::to_string(c));
    }
    ds.validate();
    return ds;
}

}  // namespace fadml

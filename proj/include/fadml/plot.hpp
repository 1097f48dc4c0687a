#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fadml/harness.hpp"

namespace fadml {

struct plot_series {
    std::string name;
    std::vector<double> values;  // aligned with the chart's x labels; NaN = gap
};

namespace detail {

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof palette / sizeof palette[0])];
}

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

// Self-contained SVG line chart; y spans [0,1] (rates). Text-based on
// purpose: tests assert on the markup.
inline std::string svg_line_chart(const std::string& title,
                                  const std::vector<std::string>& x_labels,
                                  const std::vector<plot_series>& series,
                                  const std::string& y_label) {
    const int width = 720, height = 440;
    const double left = 70, right = 180, top = 50, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const std::size_t nx = x_labels.size();

    const auto x_of = [&](std::size_t i) {
        return nx <= 1 ? left + plot_w / 2 : left + plot_w * static_cast<double>(i) / (nx - 1);
    };
    const auto y_of = [&](double v) {
        return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0));
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(width / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" font-family=\"sans-serif\">" +
           title + "</text>\n";

    // y grid and labels
    for (int g = 0; g <= 4; ++g) {
        const double v = g * 0.25;
        const double y = y_of(v);
        svg += "<line x1=\"" + detail::fmt_coord(left) + "\" y1=\"" + detail::fmt_coord(y) +
               "\" x2=\"" + detail::fmt_coord(left + plot_w) + "\" y2=\"" + detail::fmt_coord(y) +
               "\" stroke=\"#dddddd\"/>\n";
        svg += "<text x=\"" + detail::fmt_coord(left - 8) + "\" y=\"" +
               detail::fmt_coord(y + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
               detail::fmt_coord(v) + "</text>\n";
    }
    svg += "<text x=\"18\" y=\"" + detail::fmt_coord(top + plot_h / 2) +
           "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 " +
           detail::fmt_coord(top + plot_h / 2) + ")\">" + y_label + "</text>\n";

    // x axis labels
    for (std::size_t i = 0; i < nx; ++i)
        svg += "<text x=\"" + detail::fmt_coord(x_of(i)) + "\" y=\"" +
               detail::fmt_coord(top + plot_h + 20) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
               x_labels[i] + "</text>\n";

    // axes
    svg += "<line x1=\"" + detail::fmt_coord(left) + "\" y1=\"" + detail::fmt_coord(top) +
           "\" x2=\"" + detail::fmt_coord(left) + "\" y2=\"" + detail::fmt_coord(top + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::fmt_coord(left) + "\" y1=\"" + detail::fmt_coord(top + plot_h) +
           "\" x2=\"" + detail::fmt_coord(left + plot_w) + "\" y2=\"" +
           detail::fmt_coord(top + plot_h) + "\" stroke=\"black\"/>\n";

    // series polylines + legend
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string points;
        for (std::size_t i = 0; i < series[s].values.size() && i < nx; ++i) {
            const double v = series[s].values[i];
            if (std::isnan(v)) continue;
            points += detail::fmt_coord(x_of(i)) + "," + detail::fmt_coord(y_of(v)) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(detail::series_color(s)) +
               "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
        const double ly = top + 10 + 18 * static_cast<double>(s);
        svg += "<line x1=\"" + detail::fmt_coord(left + plot_w + 12) + "\" y1=\"" +
               detail::fmt_coord(ly) + "\" x2=\"" + detail::fmt_coord(left + plot_w + 34) +
               "\" y2=\"" + detail::fmt_coord(ly) + "\" stroke=\"" +
               std::string(detail::series_color(s)) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fmt_coord(left + plot_w + 40) + "\" y=\"" +
               detail::fmt_coord(ly + 4) + "\" font-size=\"11\" font-family=\"sans-serif\">" +
               series[s].name + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

namespace detail {

inline double mean_cell_metric(const evaluation_report& rep, const std::string& attack,
                               const filter_config& f, threat_model tm,
                               double report_cell::*metric) {
    double sum = 0;
    int n = 0;
    for (const report_cell& c : rep.cells) {
        if (c.attack != attack || !(c.filter == f) || c.tm != tm) continue;
        if (c.n_samples == 0) continue;
        sum += c.*metric;
        ++n;
    }
    return n ? sum / n : std::nan("");
}

}  // namespace detail

// top-5 accuracy against filter strength for one filter family: a clean-data
// curve plus one adversarial curve per attack (scenario-averaged, TM2)
inline std::string plot_top5_vs_strength(const evaluation_report& rep, filter_kind family) {
    std::vector<std::string> x_labels;
    std::vector<filter_config> configs;
    for (const filter_config& f : rep.filters) {
        if (f.kind != family) continue;
        configs.push_back(f);
        x_labels.push_back(std::to_string(f.param()));
    }
    std::vector<plot_series> series;
    plot_series clean{"clean", {}};
    for (const filter_config& f : configs)
        clean.values.push_back(rep.clean_for(f, threat_model::tm2).top5_acc);
    series.push_back(std::move(clean));
    for (const attack_spec& a : rep.attacks) {
        plot_series s{a.label(), {}};
        for (const filter_config& f : configs)
            s.values.push_back(detail::mean_cell_metric(rep, a.label(), f, threat_model::tm2,
                                                        &report_cell::top5_acc));
        series.push_back(std::move(s));
    }
    const std::string family_name = family == filter_kind::lap ? "np" : "r";
    return svg_line_chart("top-5 accuracy vs " + family_name + " (TM2/TM3)", x_labels, series,
                          "top-5 accuracy");
}

// targeted success per attack across the whole filter sweep (TM2)
inline std::string plot_success_by_filter(const evaluation_report& rep) {
    std::vector<std::string> x_labels;
    for (const filter_config& f : rep.filters) x_labels.push_back(f.label());
    std::vector<plot_series> series;
    for (const attack_spec& a : rep.attacks) {
        plot_series s{a.label(), {}};
        for (const filter_config& f : rep.filters)
            s.values.push_back(detail::mean_cell_metric(rep, a.label(), f, threat_model::tm2,
                                                        &report_cell::success_rate));
        series.push_back(std::move(s));
    }
    return svg_line_chart("targeted success through the filter (TM2/TM3)", x_labels, series,
                          "targeted success rate");
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("plot: cannot write " + path);
    out << content;
}

// the standard chart set emitted next to report.csv / report.json
inline void render_report_plots(const evaluation_report& rep, const std::string& out_dir) {
    bool any_lap = false, any_lar = false;
    for (const filter_config& f : rep.filters) {
        any_lap |= f.kind == filter_kind::lap;
        any_lar |= f.kind == filter_kind::lar;
    }
    if (any_lap)
        write_text_file(out_dir + "/top5_vs_np.svg", plot_top5_vs_strength(rep, filter_kind::lap));
    if (any_lar)
        write_text_file(out_dir + "/top5_vs_r.svg", plot_top5_vs_strength(rep, filter_kind::lar));
    write_text_file(out_dir + "/success_by_filter.svg", plot_success_by_filter(rep));
}

}  // namespace fadml

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fadml/attacks.hpp"
#include "fadml/dataset.hpp"
#include "fadml/errors.hpp"
#include "fadml/filters.hpp"
#include "fadml/net.hpp"
#include "fadml/parallel.hpp"

namespace fadml {

// TM1: the perturbation lands after the pre-processing filter, so the
// classifier sees it raw. TM2/TM3 place it upstream of the filter (before
// acquisition vs before buffering); both evaluate identically here, and the
// report keeps separate columns only for fidelity to the pipeline diagrams.
enum class threat_model { tm1, tm2, tm3 };

inline const char* threat_model_name(threat_model tm) {
    switch (tm) {
        case threat_model::tm1: return "TM1";
        case threat_model::tm2: return "TM2";
        case threat_model::tm3: return "TM3";
    }
    return "?";
}

inline prediction evaluate_pipeline(const network& net, const linear_filter& filter,
                                    threat_model tm, const tensor& x_adv) {
    if (tm == threat_model::tm1) return forward(net, x_adv);
    return forward(net, filter.apply(x_adv));
}

struct scenario {
    std::string name;
    int source_class;
    int target_class;
};

// The five targeted misclassification payloads, mapped onto the active
// dataset's class names.
inline std::vector<scenario> default_scenarios(const std::vector<std::string>& class_names) {
    const auto id_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return static_cast<int>(i);
        throw config_error("scenarios: class '" + name + "' is not in the class map");
    };
    const std::pair<const char*, const char*> pairs[5] = {
        {"stop", "limit-60"},      {"limit-30", "limit-80"}, {"turn-left", "turn-right"},
        {"turn-right", "turn-left"}, {"no-entry", "limit-60"}};
    std::vector<scenario> out;
    out.reserve(5);
    for (const auto& [src, dst] : pairs) {
        scenario s;
        s.name = std::string(src) + "->" + dst;
        s.source_class = id_of(src);
        s.target_class = id_of(dst);
        out.push_back(std::move(s));
    }
    return out;
}

// fraction of samples whose true label lands in the top-5 of the (optionally
// filtered) prediction
inline double top5_accuracy(const network& net, const linear_filter* filter,
                            const labeled_dataset& ds, int threads = 1) {
    if (ds.images.empty()) throw input_error("top5_accuracy: empty dataset");
    if (net.num_classes() < 6)
        throw config_error("top5_accuracy: needs at least 6 classes");
    std::vector<std::uint8_t> hit(ds.images.size(), 0);
    detail::parallel_for(ds.images.size(), threads, [&](std::size_t i) {
        const prediction p = filter ? forward(net, filter->apply(ds.images[i]))
                                    : forward(net, ds.images[i]);
        for (const auto& [cls, prob] : p.top_k(5))
            if (cls == ds.labels[i]) {
                hit[i] = 1;
                break;
            }
    });
    std::size_t n = 0;
    for (std::uint8_t h : hit) n += h;
    return static_cast<double>(n) / static_cast<double>(ds.images.size());
}

struct report_cell {
    std::string attack;
    filter_config filter;
    threat_model tm = threat_model::tm1;
    std::string scenario_name;
    int source_class = -1, target_class = -1;
    double success_rate = 0.0;
    double mean_confidence = 0.0;
    double top5_acc = 0.0;
    double eq3_cost = 0.0;
    int n_samples = 0;
    std::string status = "ok";
    std::vector<std::uint8_t> sample_success;  // per-sample outcomes, not serialized
};

struct clean_cell {
    filter_config filter;
    threat_model tm = threat_model::tm1;
    double top1_acc = 0.0;
    double top5_acc = 0.0;
    double mean_confidence = 0.0;
    double eq3_cost = 0.0;
    int n_samples = 0;
};

struct sweep_options {
    int samples_per_cell = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct evaluation_report {
    std::vector<attack_spec> attacks;
    std::vector<filter_config> filters;
    std::vector<scenario> scenarios;
    std::vector<report_cell> cells;  // ordered attack -> filter -> tm -> scenario
    std::vector<clean_cell> clean;   // ordered filter -> tm
    std::vector<std::string> class_names;
    std::uint64_t seed = 0;
    int samples_per_cell = 0;
    std::string timestamp;  // metadata only; excluded from determinism checks

    const report_cell& cell(const std::string& attack_label, const filter_config& f,
                            threat_model tm, const std::string& scenario_name) const {
        for (const report_cell& c : cells)
            if (c.attack == attack_label && c.filter == f && c.tm == tm &&
                c.scenario_name == scenario_name)
                return c;
        throw input_error("report: no cell for " + attack_label + "/" + f.label() + "/" +
                          threat_model_name(tm) + "/" + scenario_name);
    }

    const clean_cell& clean_for(const filter_config& f, threat_model tm) const {
        for (const clean_cell& c : clean)
            if (c.filter == f && c.tm == tm) return c;
        throw input_error("report: no clean cell for " + f.label());
    }
};

namespace detail {

struct sample_eval {
    bool ok = false;
    std::string error;
    tensor x_adv;
    prediction tm1_pred;
};

struct cell_stats {
    double success_sum = 0, conf_sum = 0, top5_sum = 0, eq3_sum = 0;
    int n = 0;
    std::vector<std::uint8_t> successes;
};

inline void accumulate_cell(cell_stats& st, const prediction& tm1_pred,
                            const prediction& pipe_pred, const scenario& sc) {
    const bool succ = pipe_pred.top1() == sc.target_class;
    st.success_sum += succ ? 1.0 : 0.0;
    st.conf_sum += pipe_pred.top1_confidence();
    bool in_top5 = false;
    for (const auto& [cls, prob] : pipe_pred.top_k(5))
        if (cls == sc.source_class) in_top5 = true;
    st.top5_sum += in_top5 ? 1.0 : 0.0;
    st.eq3_sum += cost_target_gap(tm1_pred, pipe_pred);
    st.successes.push_back(succ ? 1 : 0);
    ++st.n;
}

inline report_cell finish_cell(const std::string& attack_label, const filter_config& f,
                               threat_model tm, const scenario& sc, const cell_stats& st,
                               int n_failed, const std::string& first_error) {
    report_cell c;
    c.attack = attack_label;
    c.filter = f;
    c.tm = tm;
    c.scenario_name = sc.name;
    c.source_class = sc.source_class;
    c.target_class = sc.target_class;
    c.n_samples = st.n;
    if (st.n > 0) {
        c.success_rate = st.success_sum / st.n;
        c.mean_confidence = st.conf_sum / st.n;
        c.top5_acc = st.top5_sum / st.n;
        c.eq3_cost = st.eq3_sum / st.n;
    }
    c.sample_success = st.successes;
    if (st.n == 0)
        c.status = first_error.empty() ? "no-samples" : "failed: " + first_error;
    else if (n_failed > 0)
        c.status = "partial(" + std::to_string(n_failed) + " failed): " + first_error;
    return c;
}

}  // namespace detail

// The core analysis loop: generate adversarial examples per attack and
// scenario, evaluate them under TM1 and through every filter configuration
// under TM2/TM3, and aggregate the top-5 prediction gap alongside success,
// confidence and top-5 accuracy. Clean-data metrics per filter ride along.
// Cell failures are isolated: one bad sample never voids the sweep.
inline evaluation_report analyze_filter_impact(const network& net,
                                               const std::vector<attack_spec>& attacks,
                                               const std::vector<filter_config>& filter_sweep,
                                               const std::vector<scenario>& scenarios,
                                               const labeled_dataset& test_data,
                                               const sweep_options& opts = {}) {
    if (attacks.empty()) throw config_error("sweep: no attacks configured");
    if (filter_sweep.empty()) throw config_error("sweep: empty filter sweep");
    if (scenarios.empty()) throw config_error("sweep: no scenarios configured");
    if (test_data.images.empty()) throw input_error("sweep: empty dataset");
    if (!net.finalized()) throw config_error("sweep: network is not trained/finalized");

    const std::vector<int>& shape = net.input_shape();
    std::vector<linear_filter> filters;
    filters.reserve(filter_sweep.size());
    for (const filter_config& fc : filter_sweep) filters.emplace_back(fc, shape);

    evaluation_report rep;
    rep.attacks = attacks;
    rep.filters = filter_sweep;
    rep.scenarios = scenarios;
    rep.class_names = test_data.class_names;
    rep.seed = opts.seed;
    rep.samples_per_cell = opts.samples_per_cell;

    // per-scenario inputs: the first K test images of the source class, plus
    // one sample of the target class for the filter-aware attack
    std::vector<std::vector<std::size_t>> scenario_samples(scenarios.size());
    std::vector<int> y_sample_index(scenarios.size(), -1);
    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        for (std::size_t i = 0; i < test_data.images.size(); ++i) {
            if (test_data.labels[i] == scenarios[si].source_class &&
                static_cast<int>(scenario_samples[si].size()) < opts.samples_per_cell)
                scenario_samples[si].push_back(i);
            if (y_sample_index[si] < 0 && test_data.labels[i] == scenarios[si].target_class)
                y_sample_index[si] = static_cast<int>(i);
        }
    }

    const threat_model tms[3] = {threat_model::tm1, threat_model::tm2, threat_model::tm3};

    for (const attack_spec& spec : attacks) {
        const std::string label = spec.label();
        const bool filter_aware = spec.kind == attack_kind::fademl;

        // filter-independent attacks are generated once per (scenario, sample)
        std::vector<std::vector<detail::sample_eval>> base_evals;
        if (!filter_aware) {
            base_evals.resize(scenarios.size());
            for (std::size_t si = 0; si < scenarios.size(); ++si) {
                const auto& samples = scenario_samples[si];
                base_evals[si].resize(samples.size());
                detail::parallel_for(samples.size(), opts.threads, [&](std::size_t k) {
                    detail::sample_eval& ev = base_evals[si][k];
                    try {
                        adversarial_example ex = run_attack(
                            net, spec, test_data.images[samples[k]], scenarios[si].target_class);
                        ev.x_adv = std::move(ex.x_adversarial);
                        ev.tm1_pred = forward(net, ev.x_adv);
                        ev.ok = true;
                    } catch (const std::exception& e) {
                        ev.error = e.what();
                    }
                });
            }
        }

        for (std::size_t fi = 0; fi < filters.size(); ++fi) {
            const linear_filter& filter = filters[fi];

            // filter-aware attacks re-optimize against this very filter
            std::vector<std::vector<detail::sample_eval>> evals;
            if (filter_aware) {
                evals.resize(scenarios.size());
                for (std::size_t si = 0; si < scenarios.size(); ++si) {
                    const auto& samples = scenario_samples[si];
                    evals[si].resize(samples.size());
                    const int yi = y_sample_index[si];
                    detail::parallel_for(samples.size(), opts.threads, [&](std::size_t k) {
                        detail::sample_eval& ev = evals[si][k];
                        if (yi < 0) {
                            ev.error = "no target-class sample for fademl";
                            return;
                        }
                        try {
                            adversarial_example ex =
                                run_attack(net, spec, test_data.images[samples[k]],
                                           scenarios[si].target_class, &filter,
                                           &test_data.images[yi]);
                            ev.x_adv = std::move(ex.x_adversarial);
                            ev.tm1_pred = forward(net, ev.x_adv);
                            ev.ok = true;
                        } catch (const std::exception& e) {
                            ev.error = e.what();
                        }
                    });
                }
            }
            const auto& attack_evals = filter_aware ? evals : base_evals;

            // TM2 and TM3 share the filtered pipeline: evaluate once
            std::vector<std::vector<prediction>> filtered_preds(scenarios.size());
            for (std::size_t si = 0; si < scenarios.size(); ++si) {
                const auto& sevals = attack_evals[si];
                filtered_preds[si].resize(sevals.size());
                detail::parallel_for(sevals.size(), opts.threads, [&](std::size_t k) {
                    if (!sevals[k].ok) return;
                    filtered_preds[si][k] = filter.is_identity()
                                                ? sevals[k].tm1_pred
                                                : forward(net, filter.apply(sevals[k].x_adv));
                });
            }

            for (threat_model tm : tms) {
                for (std::size_t si = 0; si < scenarios.size(); ++si) {
                    const auto& sc = scenarios[si];
                    const auto& sevals = attack_evals[si];
                    detail::cell_stats st;
                    int n_failed = 0;
                    std::string first_error;
                    for (std::size_t k = 0; k < sevals.size(); ++k) {
                        if (!sevals[k].ok) {
                            ++n_failed;
                            if (first_error.empty()) first_error = sevals[k].error;
                            continue;
                        }
                        const prediction& pipe = tm == threat_model::tm1
                                                     ? sevals[k].tm1_pred
                                                     : filtered_preds[si][k];
                        detail::accumulate_cell(st, sevals[k].tm1_pred, pipe, sc);
                    }
                    rep.cells.push_back(
                        detail::finish_cell(label, filter_sweep[fi], tm, sc, st, n_failed,
                                            first_error));
                }
            }
        }
    }

    // clean-data metrics per filter configuration over the full test set
    std::vector<prediction> clean_tm1(test_data.images.size());
    detail::parallel_for(test_data.images.size(), opts.threads, [&](std::size_t i) {
        clean_tm1[i] = forward(net, test_data.images[i]);
    });
    for (std::size_t fi = 0; fi < filters.size(); ++fi) {
        const linear_filter& filter = filters[fi];
        std::vector<prediction> filtered(test_data.images.size());
        if (filter.is_identity())
            filtered = clean_tm1;
        else
            detail::parallel_for(test_data.images.size(), opts.threads, [&](std::size_t i) {
                filtered[i] = forward(net, filter.apply(test_data.images[i]));
            });
        for (threat_model tm : tms) {
            const std::vector<prediction>& preds =
                tm == threat_model::tm1 ? clean_tm1 : filtered;
            clean_cell cc;
            cc.filter = filter_sweep[fi];
            cc.tm = tm;
            cc.n_samples = static_cast<int>(test_data.images.size());
            double top1 = 0, top5 = 0, conf = 0, eq3 = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                const prediction& p = preds[i];
                if (p.top1() == test_data.labels[i]) top1 += 1.0;
                for (const auto& [cls, prob] : p.top_k(5))
                    if (cls == test_data.labels[i]) {
                        top5 += 1.0;
                        break;
                    }
                conf += p.top1_confidence();
                eq3 += cost_target_gap(clean_tm1[i], p);
            }
            cc.top1_acc = top1 / cc.n_samples;
            cc.top5_acc = top5 / cc.n_samples;
            cc.mean_confidence = conf / cc.n_samples;
            cc.eq3_cost = eq3 / cc.n_samples;
            rep.clean.push_back(cc);
        }
    }
    return rep;
}

}  // namespace fadml

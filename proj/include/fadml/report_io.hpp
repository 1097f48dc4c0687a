#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "fadml/harness.hpp"

#include "json.hpp"

namespace fadml {

namespace detail {

// fixed-width decimal so report bytes are reproducible
inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

// One row per (attack, filter, threat model, scenario) cell, in that nesting
// order. Column order is part of the file contract.
inline std::string report_csv(const evaluation_report& rep) {
    std::string out =
        "attack,filter_kind,filter_param,threat_model,scenario,success_rate,confidence,"
        "top5_acc,eq3_cost,n_samples,status\n";
    for (const report_cell& c : rep.cells) {
        out += c.attack;
        out += ',';
        out += c.filter.kind_name();
        out += ',';
        out += std::to_string(c.filter.param());
        out += ',';
        out += threat_model_name(c.tm);
        out += ',';
        out += c.scenario_name;
        out += ',';
        out += detail::fmt6(c.success_rate);
        out += ',';
        out += detail::fmt6(c.mean_confidence);
        out += ',';
        out += detail::fmt6(c.top5_acc);
        out += ',';
        out += detail::fmt6(c.eq3_cost);
        out += ',';
        out += std::to_string(c.n_samples);
        out += ',';
        out += detail::csv_safe(c.status);
        out += '\n';
    }
    return out;
}

inline void write_report_csv(const evaluation_report& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("report: cannot write " + path);
    out << report_csv(rep);
}

inline nlohmann::json attack_spec_json(const attack_spec& s) {
    nlohmann::json j;
    j["kind"] = attack_kind_name(s.kind);
    if (s.kind == attack_kind::fademl) j["base"] = attack_kind_name(s.base);
    j["label"] = s.label();
    j["epsilon"] = s.epsilon;
    j["eta"] = s.eta;
    j["step_size"] = s.step_size;
    j["max_iters"] = s.max_iters;
    j["penalty_weight"] = s.penalty_weight;
    j["targeted"] = s.targeted;
    return j;
}

inline attack_spec attack_spec_from_json(const nlohmann::json& j) {
    attack_spec s;
    s.kind = attack_spec::parse_kind(j.at("kind").get<std::string>());
    if (j.contains("base")) s.base = attack_spec::parse_kind(j.at("base").get<std::string>());
    s.epsilon = j.value("epsilon", s.epsilon);
    s.eta = j.value("eta", s.eta);
    s.step_size = j.value("step_size", s.step_size);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.penalty_weight = j.value("penalty_weight", s.penalty_weight);
    s.targeted = j.value("targeted", true);
    return s;
}

inline nlohmann::json report_json(const evaluation_report& rep) {
    nlohmann::json meta;
    meta["seed"] = rep.seed;
    meta["samples_per_cell"] = rep.samples_per_cell;
    meta["timestamp"] = rep.timestamp;
    meta["class_names"] = rep.class_names;
    meta["attacks"] = nlohmann::json::array();
    for (const attack_spec& s : rep.attacks) meta["attacks"].push_back(attack_spec_json(s));
    meta["filters"] = nlohmann::json::array();
    for (const filter_config& f : rep.filters) meta["filters"].push_back(f.label());
    meta["scenarios"] = nlohmann::json::array();
    for (const scenario& s : rep.scenarios)
        meta["scenarios"].push_back(
            {{"name", s.name}, {"source", s.source_class}, {"target", s.target_class}});

    nlohmann::json clean = nlohmann::json::array();
    for (const clean_cell& c : rep.clean)
        clean.push_back({{"filter", c.filter.label()},
                         {"threat_model", threat_model_name(c.tm)},
                         {"top1_acc", c.top1_acc},
                         {"top5_acc", c.top5_acc},
                         {"confidence", c.mean_confidence},
                         {"eq3_cost", c.eq3_cost},
                         {"n_samples", c.n_samples}});

    nlohmann::json cells = nlohmann::json::array();
    for (const report_cell& c : rep.cells)
        cells.push_back({{"attack", c.attack},
                         {"filter", c.filter.label()},
                         {"threat_model", threat_model_name(c.tm)},
                         {"scenario", c.scenario_name},
                         {"source_class", c.source_class},
                         {"target_class", c.target_class},
                         {"success_rate", c.success_rate},
                         {"confidence", c.mean_confidence},
                         {"top5_acc", c.top5_acc},
                         {"eq3_cost", c.eq3_cost},
                         {"n_samples", c.n_samples},
                         {"status", c.status}});

    return nlohmann::json{{"metadata", meta}, {"clean", clean}, {"cells", cells}};
}

inline void write_report_json(const evaluation_report& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("report: cannot write " + path);
    out << report_json(rep).dump(2) << "\n";
}

inline threat_model threat_model_from_name(const std::string& name) {
    if (name == "TM1") return threat_model::tm1;
    if (name == "TM2") return threat_model::tm2;
    if (name == "TM3") return threat_model::tm3;
    throw input_error("report: unknown threat model '" + name + "'");
}

// enough of the report to re-render plots and recover metadata
inline evaluation_report parse_report_json(const nlohmann::json& j) {
    evaluation_report rep;
    const nlohmann::json& meta = j.at("metadata");
    rep.seed = meta.value("seed", 0ULL);
    rep.samples_per_cell = meta.value("samples_per_cell", 0);
    rep.timestamp = meta.value("timestamp", "");
    if (meta.contains("class_names"))
        rep.class_names = meta.at("class_names").get<std::vector<std::string>>();
    for (const auto& a : meta.value("attacks", nlohmann::json::array()))
        rep.attacks.push_back(attack_spec_from_json(a));
    for (const auto& f : meta.value("filters", nlohmann::json::array()))
        rep.filters.push_back(filter_config::parse(f.get<std::string>()));
    for (const auto& s : meta.value("scenarios", nlohmann::json::array())) {
        scenario sc;
        sc.name = s.at("name").get<std::string>();
        sc.source_class = s.value("source", -1);
        sc.target_class = s.value("target", -1);
        rep.scenarios.push_back(std::move(sc));
    }
    for (const auto& c : j.value("clean", nlohmann::json::array())) {
        clean_cell cc;
        cc.filter = filter_config::parse(c.at("filter").get<std::string>());
        cc.tm = threat_model_from_name(c.at("threat_model").get<std::string>());
        cc.top1_acc = c.value("top1_acc", 0.0);
        cc.top5_acc = c.value("top5_acc", 0.0);
        cc.mean_confidence = c.value("confidence", 0.0);
        cc.eq3_cost = c.value("eq3_cost", 0.0);
        cc.n_samples = c.value("n_samples", 0);
        rep.clean.push_back(cc);
    }
    for (const auto& c : j.value("cells", nlohmann::json::array())) {
        report_cell rc;
        rc.attack = c.at("attack").get<std::string>();
        rc.filter = filter_config::parse(c.at("filter").get<std::string>());
        rc.tm = threat_model_from_name(c.at("threat_model").get<std::string>());
        rc.scenario_name = c.at("scenario").get<std::string>();
        rc.source_class = c.value("source_class", -1);
        rc.target_class = c.value("target_class", -1);
        rc.success_rate = c.value("success_rate", 0.0);
        rc.mean_confidence = c.value("confidence", 0.0);
        rc.top5_acc = c.value("top5_acc", 0.0);
        rc.eq3_cost = c.value("eq3_cost", 0.0);
        rc.n_samples = c.value("n_samples", 0);
        rc.status = c.value("status", "ok");
        rep.cells.push_back(std::move(rc));
    }
    return rep;
}

inline evaluation_report load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("report: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("report: malformed json in " + path + ": " + e.what());
    }
    try {
        return parse_report_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw io_error("report: unexpected json layout in " + path + ": " + e.what());
    }
}

}  // namespace fadml

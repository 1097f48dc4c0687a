#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fadml/attacks.hpp"
#include "fadml/errors.hpp"
#include "fadml/filters.hpp"
#include "fadml/net.hpp"

#include "json.hpp"

namespace fadml {

// Whole-experiment configuration. Two on-disk forms map onto this struct:
// a flat "section.key = value" text file and an equivalent JSON document.
struct experiment_config {
    std::uint64_t seed = 42;
    std::string out_dir;  // resolved by the CLI (flag > config > FADEML_OUT > "out")
    int threads = 1;

    // dataset
    std::string dataset_kind = "synthetic";  // synthetic | gtsrb
    int num_classes = 10;
    int per_class = 500;
    int image_size = 32;
    std::string dataset_path;       // gtsrb train directory
    std::string dataset_test_path;  // optional separate gtsrb test directory

    // model
    int width_divisor = 8;

    // training
    float learning_rate = 0.08f;
    int epochs = 10;
    int batch_size = 32;
    float weight_init_scale = 1.0f;

    // single-attack section (cmd_attack); also supplies the hyper-parameter
    // defaults for every sweep attack
    std::string attack_kind = "bim";
    std::string attack_base = "bim";
    std::optional<float> attack_epsilon;
    std::optional<float> attack_eta;
    std::optional<float> attack_step_size;
    std::optional<int> attack_max_iters;
    std::optional<float> attack_penalty_weight;
    bool attack_targeted = true;
    std::string attack_target;  // class name or numeric id; empty = scenario default

    // single-filter section (cmd_attack pipeline); defaults to lar r=2
    std::string filter_kind_str = "lar";
    std::optional<int> filter_np;
    std::optional<int> filter_r;

    // sweep
    std::vector<std::string> sweep_attacks = {"fgsm", "bim", "lbfgs", "fademl:bim"};
    std::vector<filter_config> sweep_filters = default_filter_sweep();
    int samples_per_cell = 100;

    // scenarios: "default" or explicit "src->dst" pairs by class name
    bool scenarios_default = true;
    std::vector<std::pair<std::string, std::string>> scenario_pairs;

    train_config make_train_config() const {
        train_config cfg;
        cfg.learning_rate = learning_rate;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.weight_init_scale = weight_init_scale;
        return cfg;
    }

    // Applies the documented defaults: epsilon 0.05, alpha = epsilon/10 for
    // the iterative baselines, lambda 0.01 for the filter-aware refinement,
    // eta 1, 50 iterations, penalty weight 1.
    attack_spec make_attack_spec(const std::string& label) const {
        attack_spec s = attack_spec::parse(label);
        s.epsilon = attack_epsilon.value_or(0.05f);
        s.eta = attack_eta.value_or(1.0f);
        s.step_size = attack_step_size.value_or(
            s.kind == attack_kind::fademl ? 0.01f
            : s.epsilon > 0.0f            ? s.epsilon / 10.0f
                                          : 0.005f);
        s.max_iters = attack_max_iters.value_or(50);
        s.penalty_weight = attack_penalty_weight.value_or(1.0f);
        s.targeted = attack_targeted;
        s.validate();
        return s;
    }

    attack_spec make_primary_attack_spec() const {
        std::string label = attack_kind;
        if (label == "fademl") label += ":" + attack_base;
        return make_attack_spec(label);
    }

    filter_config make_filter_config() const {
        filter_config f;
        if (filter_kind_str == "identity") f.kind = filter_kind::identity;
        else if (filter_kind_str == "lap") f.kind = filter_kind::lap;
        else if (filter_kind_str == "lar") f.kind = filter_kind::lar;
        else throw config_error("config: unknown filter.kind '" + filter_kind_str + "'");
        f.np = filter_np.value_or(0);
        f.r = filter_r.value_or(f.kind == filter_kind::lar && !filter_np ? 2 : 0);
        f.validate();
        return f;
    }

    std::vector<attack_spec> make_sweep_attacks() const {
        std::vector<attack_spec> out;
        for (const std::string& label : sweep_attacks) out.push_back(make_attack_spec(label));
        return out;
    }

    void validate() const {
        if (dataset_kind != "synthetic" && dataset_kind != "gtsrb")
            throw config_error("config: dataset.kind must be synthetic or gtsrb");
        if (dataset_kind == "gtsrb" && dataset_path.empty())
            throw config_error("config: dataset.path is required for dataset.kind = gtsrb");
        if (dataset_kind == "synthetic") {
            if (num_classes < 6 || num_classes > 10)
                throw config_error("config: dataset.num_classes must be in [6,10]");
            if (per_class < 10) throw config_error("config: dataset.per_class must be >= 10");
        }
        if (image_size < 16) throw config_error("config: dataset.image_size must be >= 16");
        if (threads < 1) throw config_error("config: threads must be >= 1");
        if (samples_per_cell < 1)
            throw config_error("config: sweep.samples_per_cell must be >= 1");
        if (sweep_attacks.empty()) throw config_error("config: sweep.attacks is empty");
        if (sweep_filters.empty()) throw config_error("config: sweep.filters is empty");
        make_train_config().validate();
        make_primary_attack_spec();  // validates
        make_sweep_attacks();
        make_filter_config();
        if (!scenarios_default && scenario_pairs.empty())
            throw config_error("config: scenarios must be 'default' or a list of src->dst pairs");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T v;
    ss >> v;
    if (ss.fail() || !ss.eof())
        throw config_error("config: bad numeric value for " + key + ": '" + value + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw config_error("config: bad boolean for " + key + ": '" + value + "'");
}

inline std::vector<std::pair<std::string, std::string>> parse_scenario_pairs(
    const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& pair : split_list(text)) {
        const auto arrow = pair.find("->");
        if (arrow == std::string::npos)
            throw config_error("config: scenario '" + pair + "' must look like src->dst");
        const std::string src = trim(pair.substr(0, arrow));
        const std::string dst = trim(pair.substr(arrow + 2));
        if (src.empty() || dst.empty() || src == dst)
            throw config_error("config: scenario '" + pair + "' needs distinct src and dst");
        out.emplace_back(src, dst);
    }
    return out;
}

inline void apply_key(experiment_config& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "threads") cfg.threads = parse_number<int>(key, value);
    else if (key == "dataset.kind") cfg.dataset_kind = value;
    else if (key == "dataset.num_classes") cfg.num_classes = parse_number<int>(key, value);
    else if (key == "dataset.per_class") cfg.per_class = parse_number<int>(key, value);
    else if (key == "dataset.image_size") cfg.image_size = parse_number<int>(key, value);
    else if (key == "dataset.path") cfg.dataset_path = value;
    else if (key == "dataset.test_path") cfg.dataset_test_path = value;
    else if (key == "model.width_divisor") cfg.width_divisor = parse_number<int>(key, value);
    else if (key == "train.learning_rate") cfg.learning_rate = parse_number<float>(key, value);
    else if (key == "train.epochs") cfg.epochs = parse_number<int>(key, value);
    else if (key == "train.batch_size") cfg.batch_size = parse_number<int>(key, value);
    else if (key == "train.weight_init_scale")
        cfg.weight_init_scale = parse_number<float>(key, value);
    else if (key == "attack.kind") cfg.attack_kind = value;
    else if (key == "attack.base") cfg.attack_base = value;
    else if (key == "attack.epsilon") cfg.attack_epsilon = parse_number<float>(key, value);
    else if (key == "attack.eta") cfg.attack_eta = parse_number<float>(key, value);
    else if (key == "attack.step_size") cfg.attack_step_size = parse_number<float>(key, value);
    else if (key == "attack.max_iters") cfg.attack_max_iters = parse_number<int>(key, value);
    else if (key == "attack.penalty_weight")
        cfg.attack_penalty_weight = parse_number<float>(key, value);
    else if (key == "attack.targeted") cfg.attack_targeted = parse_bool(key, value);
    else if (key == "attack.target") cfg.attack_target = value;
    else if (key == "filter.kind") cfg.filter_kind_str = value;
    else if (key == "filter.np") cfg.filter_np = parse_number<int>(key, value);
    else if (key == "filter.r") cfg.filter_r = parse_number<int>(key, value);
    else if (key == "sweep.attacks") cfg.sweep_attacks = split_list(value);
    else if (key == "sweep.filters") {
        cfg.sweep_filters.clear();
        for (const std::string& f : split_list(value))
            cfg.sweep_filters.push_back(filter_config::parse(f));
    } else if (key == "sweep.samples_per_cell")
        cfg.samples_per_cell = parse_number<int>(key, value);
    else if (key == "scenarios") {
        if (value == "default") {
            cfg.scenarios_default = true;
            cfg.scenario_pairs.clear();
        } else {
            cfg.scenarios_default = false;
            cfg.scenario_pairs = parse_scenario_pairs(value);
        }
    } else
        throw config_error("config: unknown key '" + key + "'");
}

}  // namespace detail

inline experiment_config parse_flat_config(const std::string& text) {
    experiment_config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config: line " + std::to_string(lineno) +
                               " is not a key = value pair");
        detail::apply_key(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    return cfg;
}

inline experiment_config load_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_flat_config(ss.str());
}

inline experiment_config parse_json_config(const nlohmann::json& j) {
    experiment_config cfg;
    const auto apply = [&](const std::string& key, const nlohmann::json& v) {
        if (v.is_string()) detail::apply_key(cfg, key, v.get<std::string>());
        else if (v.is_boolean()) detail::apply_key(cfg, key, v.get<bool>() ? "true" : "false");
        else if (v.is_number()) {
            std::ostringstream os;
            os << v;
            detail::apply_key(cfg, key, os.str());
        } else
            throw config_error("config: unsupported json value for " + key);
    };
    for (const auto& [section, value] : j.items()) {
        if (section == "sweep" && value.is_object()) {
            // list-valued keys get native json arrays
            for (const auto& [k, v] : value.items()) {
                if (k == "attacks" && v.is_array()) {
                    cfg.sweep_attacks.clear();
                    for (const auto& a : v) cfg.sweep_attacks.push_back(a.get<std::string>());
                } else if (k == "filters" && v.is_array()) {
                    cfg.sweep_filters.clear();
                    for (const auto& f : v)
                        cfg.sweep_filters.push_back(filter_config::parse(f.get<std::string>()));
                } else
                    apply("sweep." + k, v);
            }
        } else if (section == "scenarios") {
            if (value.is_string())
                detail::apply_key(cfg, "scenarios", value.get<std::string>());
            else if (value.is_array()) {
                cfg.scenarios_default = false;
                cfg.scenario_pairs.clear();
                for (const auto& s : value) {
                    if (s.is_string()) {
                        auto pairs = detail::parse_scenario_pairs(s.get<std::string>());
                        cfg.scenario_pairs.insert(cfg.scenario_pairs.end(), pairs.begin(),
                                                  pairs.end());
                    } else
                        cfg.scenario_pairs.emplace_back(s.at("source").get<std::string>(),
                                                        s.at("target").get<std::string>());
                }
            } else
                throw config_error("config: scenarios must be 'default', a list or pair objects");
        } else if (value.is_object()) {
            for (const auto& [k, v] : value.items()) apply(section + "." + k, v);
        } else {
            apply(section, value);
        }
    }
    return cfg;
}

inline experiment_config load_json_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: malformed json in " + path + ": " + e.what());
    }
    try {
        return parse_json_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: bad json layout in " + path + ": " + e.what());
    }
}

}  // namespace fadml

// fadml — desk-scale lab for studying how pre-processing smoothing filters
// interact with gradient-based adversarial attacks.
//
// Subcommands:
//   train   train the VGG-mini classifier, write <out>/model.fadm + train.csv
//   attack  craft one adversarial example, write PPMs + a JSON sidecar
//   sweep   run the full attack x filter x threat-model x scenario grid,
//           write report.csv, report.json and SVG charts
//   report  re-render the charts from an existing report.json
//
// Exit codes: 0 ok, 2 configuration error, 3 training failure, 4 attack did
// not succeed under --require-success, 5 I/O error, 1 anything else.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fadml/attacks.hpp"
#include "fadml/checkpoint.hpp"
#include "fadml/config.hpp"
#include "fadml/dataset.hpp"
#include "fadml/harness.hpp"
#include "fadml/plot.hpp"
#include "fadml/ppm.hpp"
#include "fadml/report_io.hpp"

#include "CLI11.hpp"

namespace {

struct attack_failed {};  // maps to exit 4 under --require-success

struct cli_options {
    std::string config_path;
    std::string config_json_path;
    std::string out_flag;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool require_success = false;
    // attack input selection
    std::string image_path;
    std::optional<int> dataset_index;
    int scenario_index = 0;
};

const char* config_key_help =
    "Config keys (flat file: 'section.key = value' lines, '#' comments; the\n"
    "same structure nested as JSON via --config-json):\n"
    "  seed                     master RNG seed (default 42)\n"
    "  out                      output directory (flag --out and FADEML_OUT override/default)\n"
    "  threads                  worker threads for sweeps (default 1)\n"
    "  dataset.kind             synthetic | gtsrb (default synthetic)\n"
    "  dataset.num_classes      synthetic classes, 6..10 (default 10)\n"
    "  dataset.per_class        synthetic images per class before the 80/20 split (default 500)\n"
    "  dataset.image_size       square input size, >= 16 (default 32)\n"
    "  dataset.path             gtsrb train directory (per-class folders + csv)\n"
    "  dataset.test_path        optional gtsrb test directory (else 80/20 split)\n"
    "  model.width_divisor      vgg-mini width divisor in {1,2,4,8,16} (default 8)\n"
    "  train.learning_rate      sgd step (default 0.08)\n"
    "  train.epochs             epochs (default 10)\n"
    "  train.batch_size         minibatch size (default 32)\n"
    "  train.weight_init_scale  init scale/sqrt(fan-in) (default 1.0)\n"
    "  attack.kind              fgsm | bim | lbfgs | fademl (default bim)\n"
    "  attack.base              fademl base attack (default bim)\n"
    "  attack.epsilon           perturbation budget (default 0.05)\n"
    "  attack.eta               noise scaling factor (default 1.0)\n"
    "  attack.step_size         bim alpha (default epsilon/10) / fademl lambda (default 0.01)\n"
    "  attack.max_iters         iteration budget (default 50)\n"
    "  attack.penalty_weight    lbfgs starting penalty c (default 1.0)\n"
    "  attack.targeted          true | false (default true)\n"
    "  attack.target            target class name or id (default: scenario target)\n"
    "  filter.kind              identity | lap | lar for the attack pipeline (default lar)\n"
    "  filter.np                lap neighbor count (canonical: 4,8,16,32,64)\n"
    "  filter.r                 lar radius (canonical: 1..5; default 2)\n"
    "  sweep.attacks            comma list, e.g. fgsm,bim,lbfgs,fademl:bim (default)\n"
    "  sweep.filters            comma list, e.g. identity,lap:4,lar:2 (default: identity +\n"
    "                           lap 4/8/16/32/64 + lar 1..5)\n"
    "  sweep.samples_per_cell   source-class test images per cell (default 100)\n"
    "  scenarios                'default' (the five sign payloads) or 'src->dst,...'\n";

fadml::experiment_config resolve_config(const cli_options& opt) {
    if (!opt.config_path.empty() && !opt.config_json_path.empty())
        throw fadml::config_error("use either --config or --config-json, not both");
    fadml::experiment_config cfg;
    if (!opt.config_path.empty()) cfg = fadml::load_flat_config(opt.config_path);
    else if (!opt.config_json_path.empty()) cfg = fadml::load_json_config(opt.config_json_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.threads) cfg.threads = *opt.threads;
    if (!opt.out_flag.empty()) {
        cfg.out_dir = opt.out_flag;
    } else if (cfg.out_dir.empty()) {
        const char* env = std::getenv("FADEML_OUT");
        cfg.out_dir = env && *env ? env : "out";
    }
    cfg.validate();
    return cfg;
}

struct data_bundle {
    fadml::labeled_dataset train;
    fadml::labeled_dataset test;
};

// deterministic per-class 80/20 split, first 80% (file order) to train
data_bundle split_80_20(fadml::labeled_dataset all) {
    data_bundle out;
    out.train.class_names = out.test.class_names = all.class_names;
    out.train.split = "train";
    out.test.split = "test";
    std::vector<int> seen(all.class_names.size(), 0);
    std::vector<int> total(all.class_names.size(), 0);
    for (int l : all.labels) ++total[l];
    for (std::size_t i = 0; i < all.images.size(); ++i) {
        const int l = all.labels[i];
        fadml::labeled_dataset& dst =
            seen[l] < (total[l] * 8) / 10 ? out.train : out.test;
        ++seen[l];
        dst.images.push_back(std::move(all.images[i]));
        dst.labels.push_back(l);
    }
    return out;
}

data_bundle make_dataset(const fadml::experiment_config& cfg) {
    if (cfg.dataset_kind == "synthetic") {
        auto [train, test] = fadml::generate_synthetic_signs(cfg.num_classes, cfg.per_class,
                                                             cfg.image_size, cfg.seed);
        return {std::move(train), std::move(test)};
    }
    fadml::labeled_dataset train = fadml::load_gtsrb_format(cfg.dataset_path, cfg.image_size);
    if (!cfg.dataset_test_path.empty()) {
        fadml::labeled_dataset test =
            fadml::load_gtsrb_format(cfg.dataset_test_path, cfg.image_size);
        train.split = "train";
        test.split = "test";
        return {std::move(train), std::move(test)};
    }
    return split_80_20(std::move(train));
}

std::vector<fadml::scenario> make_scenarios(const fadml::experiment_config& cfg,
                                            const fadml::labeled_dataset& ds) {
    if (cfg.scenarios_default) return fadml::default_scenarios(ds.class_names);
    std::vector<fadml::scenario> out;
    for (const auto& [src, dst] : cfg.scenario_pairs) {
        fadml::scenario s;
        s.name = src + "->" + dst;
        s.source_class = ds.class_id(src);
        s.target_class = ds.class_id(dst);
        out.push_back(std::move(s));
    }
    return out;
}

int resolve_class(const std::string& text, const fadml::labeled_dataset& ds) {
    if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
        const int id = std::stoi(text);
        if (id < 0 || id >= static_cast<int>(ds.class_names.size()))
            throw fadml::config_error("class id " + text + " out of range");
        return id;
    }
    return ds.class_id(text);
}

std::string model_path(const fadml::experiment_config& cfg) {
    return cfg.out_dir + "/model.fadm";
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

nlohmann::json prediction_json(const fadml::prediction& p,
                               const std::vector<std::string>& class_names) {
    nlohmann::json j;
    const auto top = p.top_k(5);
    j["top1"] = top[0].first;
    j["top1_name"] = top[0].first < static_cast<int>(class_names.size())
                         ? class_names[top[0].first]
                         : std::to_string(top[0].first);
    j["confidence"] = top[0].second;
    j["top5"] = nlohmann::json::array();
    for (const auto& [cls, prob] : top) j["top5"].push_back({{"class", cls}, {"prob", prob}});
    return j;
}

int cmd_train(const cli_options& opt) {
    const fadml::experiment_config cfg = resolve_config(opt);
    std::filesystem::create_directories(cfg.out_dir);

    const data_bundle data = make_dataset(cfg);
    std::cout << "dataset: " << data.train.size() << " train / " << data.test.size()
              << " test images, " << data.train.class_names.size() << " classes\n";

    fadml::network net = fadml::build_vgg_mini(
        {3, cfg.image_size, cfg.image_size}, static_cast<int>(data.train.class_names.size()),
        cfg.width_divisor, cfg.seed, cfg.weight_init_scale);
    std::cout << "model: vgg-mini/" << cfg.width_divisor << ", " << net.param_count()
              << " parameters\n";

    const auto t0 = std::chrono::steady_clock::now();
    fadml::train_result res = fadml::train(std::move(net), data.train, cfg.make_train_config(),
                                           cfg.threads);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (const fadml::epoch_stats& e : res.trace)
        std::printf("epoch %2d  loss %.4f  train top-1 %.4f\n", e.epoch, e.mean_loss, e.accuracy);

    fadml::save_checkpoint(res.net, model_path(cfg));
    {
        std::ofstream trace(cfg.out_dir + "/train.csv", std::ios::binary);
        if (!trace) throw fadml::io_error("cannot write " + cfg.out_dir + "/train.csv");
        trace << "epoch,mean_loss,train_accuracy\n";
        char buf[64];
        for (const fadml::epoch_stats& e : res.trace) {
            std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", e.epoch, e.mean_loss, e.accuracy);
            trace << buf;
        }
    }

    // test-set summary
    int correct = 0;
    for (std::size_t i = 0; i < data.test.size(); ++i)
        if (fadml::forward(res.net, data.test.images[i]).top1() == data.test.labels[i])
            ++correct;
    const double top1 = static_cast<double>(correct) / data.test.size();
    const double top5 = fadml::top5_accuracy(res.net, nullptr, data.test, cfg.threads);
    std::printf("trained in %.1fs; clean test top-1 %.4f, top-5 %.4f\n", secs, top1, top5);
    std::cout << "wrote " << model_path(cfg) << " and " << cfg.out_dir << "/train.csv\n";
    return 0;
}

int cmd_attack(const cli_options& opt) {
    const fadml::experiment_config cfg = resolve_config(opt);
    std::filesystem::create_directories(cfg.out_dir);
    fadml::network net = fadml::load_checkpoint(model_path(cfg));

    const data_bundle data = make_dataset(cfg);
    const std::vector<fadml::scenario> scenarios = make_scenarios(cfg, data.test);
    if (opt.scenario_index < 0 || opt.scenario_index >= static_cast<int>(scenarios.size()))
        throw fadml::config_error("scenario index out of range");
    const fadml::scenario& sc = scenarios[opt.scenario_index];

    // input selection: explicit image, explicit test index, else the first
    // test image of the scenario's source class
    fadml::tensor x;
    std::string input_desc;
    if (!opt.image_path.empty()) {
        x = fadml::read_ppm(opt.image_path);
        if (x.shape() != net.input_shape())
            x = fadml::resize_bilinear(x, net.input_shape()[1], net.input_shape()[2]);
        input_desc = opt.image_path;
    } else if (opt.dataset_index) {
        if (*opt.dataset_index < 0 ||
            *opt.dataset_index >= static_cast<int>(data.test.size()))
            throw fadml::config_error("--index out of range for the test split");
        x = data.test.images[*opt.dataset_index];
        input_desc = "test[" + std::to_string(*opt.dataset_index) + "]";
    } else {
        for (std::size_t i = 0; i < data.test.size(); ++i)
            if (data.test.labels[i] == sc.source_class) {
                x = data.test.images[i];
                input_desc = "test[" + std::to_string(i) + "] (" + sc.name + ")";
                break;
            }
        if (x.empty()) throw fadml::config_error("no test image of the scenario source class");
    }

    const int target = cfg.attack_target.empty() ? sc.target_class
                                                 : resolve_class(cfg.attack_target, data.test);
    const fadml::filter_config fc = cfg.make_filter_config();
    const fadml::linear_filter filter(fc, net.input_shape());

    fadml::attack_spec spec = cfg.make_primary_attack_spec();
    const fadml::tensor* y_sample = nullptr;
    std::size_t y_index = 0;
    if (spec.kind == fadml::attack_kind::fademl) {
        for (std::size_t i = 0; i < data.test.size(); ++i)
            if (data.test.labels[i] == target) {
                y_index = i;
                y_sample = &data.test.images[i];
                break;
            }
        if (!y_sample) throw fadml::config_error("no test image of the target class for fademl");
    }

    const fadml::adversarial_example ex =
        fadml::run_attack(net, spec, x, target, &filter, y_sample);

    const fadml::prediction p_clean = fadml::forward(net, x);
    const fadml::prediction p_tm1 = fadml::forward(net, ex.x_adversarial);
    const fadml::prediction p_tm2 =
        fadml::evaluate_pipeline(net, filter, fadml::threat_model::tm2, ex.x_adversarial);

    fadml::write_ppm(cfg.out_dir + "/adversarial.ppm", ex.x_adversarial);
    // noise rescaled to [0,1] around gray for viewing
    fadml::tensor noise_vis = ex.noise;
    const float m = std::max(ex.linf_noise_norm, 1e-6f);
    for (std::size_t i = 0; i < noise_vis.size(); ++i)
        noise_vis[i] = 0.5f + noise_vis[i] / (2.0f * m);
    fadml::write_ppm(cfg.out_dir + "/noise.ppm", noise_vis);

    nlohmann::json side;
    side["input"] = input_desc;
    side["attack"] = fadml::attack_spec_json(ex.spec);
    side["target_class"] = target;
    side["target_name"] = data.test.class_names[target];
    side["filter"] = fc.label();
    side["scenario"] = sc.name;
    side["iterations_used"] = ex.iterations_used;
    side["l2_noise_norm"] = ex.l2_noise_norm;
    side["linf_noise_norm"] = ex.linf_noise_norm;
    side["success_unfiltered"] = ex.success_unfiltered;
    if (ex.success_filtered) side["success_filtered"] = *ex.success_filtered;
    if (ex.spec.kind == fadml::attack_kind::fademl) {
        side["initial_target_gap"] = ex.initial_target_gap;
        side["final_cost_gap"] = ex.final_cost_gap;
        side["y_sample"] = "test[" + std::to_string(y_index) + "]";
    }
    side["clean_prediction"] = prediction_json(p_clean, data.test.class_names);
    side["tm1_prediction"] = prediction_json(p_tm1, data.test.class_names);
    side["tm2_prediction"] = prediction_json(p_tm2, data.test.class_names);
    {
        std::ofstream out(cfg.out_dir + "/adversarial.json", std::ios::binary);
        if (!out) throw fadml::io_error("cannot write " + cfg.out_dir + "/adversarial.json");
        out << side.dump(2) << "\n";
    }

    const bool succeeded = ex.spec.kind == fadml::attack_kind::fademl
                               ? ex.success_filtered.value_or(false)
                               : ex.success_unfiltered;
    std::cout << "attack " << ex.spec.label() << " on " << input_desc << ": "
              << (succeeded ? "success" : "no success") << " (tm1 top1 "
              << p_tm1.top1() << ", tm2 top1 " << p_tm2.top1() << ", target " << target
              << ")\nwrote adversarial.ppm, noise.ppm, adversarial.json under " << cfg.out_dir
              << "\n";
    if (opt.require_success && !succeeded) throw attack_failed{};
    return 0;
}

int cmd_sweep(const cli_options& opt) {
    const fadml::experiment_config cfg = resolve_config(opt);
    std::filesystem::create_directories(cfg.out_dir);
    fadml::network net = fadml::load_checkpoint(model_path(cfg));

    const data_bundle data = make_dataset(cfg);
    const std::vector<fadml::scenario> scenarios = make_scenarios(cfg, data.test);

    fadml::sweep_options sw;
    sw.samples_per_cell = cfg.samples_per_cell;
    sw.seed = cfg.seed;
    sw.threads = cfg.threads;

    const auto t0 = std::chrono::steady_clock::now();
    fadml::evaluation_report rep = fadml::analyze_filter_impact(
        net, cfg.make_sweep_attacks(), cfg.sweep_filters, scenarios, data.test, sw);
    rep.timestamp = utc_timestamp();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fadml::write_report_csv(rep, cfg.out_dir + "/report.csv");
    fadml::write_report_json(rep, cfg.out_dir + "/report.json");
    fadml::render_report_plots(rep, cfg.out_dir);

    int all_failed = 0;
    for (const fadml::report_cell& c : rep.cells)
        if (c.n_samples == 0) ++all_failed;
    std::printf("sweep: %zu cells (%d empty) in %.1fs\n", rep.cells.size(), all_failed, secs);
    std::cout << "wrote report.csv, report.json and plots under " << cfg.out_dir << "\n";
    return all_failed == static_cast<int>(rep.cells.size()) && !rep.cells.empty() ? 1 : 0;
}

int cmd_report(const cli_options& opt) {
    const fadml::experiment_config cfg = resolve_config(opt);
    const fadml::evaluation_report rep =
        fadml::load_report_json(cfg.out_dir + "/report.json");
    fadml::render_report_plots(rep, cfg.out_dir);
    std::cout << "re-rendered plots from " << cfg.out_dir << "/report.json\n";
    return 0;
}

void add_common(CLI::App* cmd, cli_options& opt) {
    cmd->add_option("--config", opt.config_path, "flat config file (section.key = value)");
    cmd->add_option("--config-json", opt.config_json_path, "JSON config file");
    cmd->add_option("--out", opt.out_flag, "output directory (overrides config and FADEML_OUT)");
    cmd->add_option("--seed", opt.seed, "override the config seed");
    cmd->add_option("--threads", opt.threads, "worker threads (results do not depend on this)");
    cmd->footer(config_key_help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fadml: smoothing-filter robustness lab for adversarial examples"};
    app.require_subcommand(1);
    app.footer(config_key_help);

    cli_options opt;
    CLI::App* train = app.add_subcommand("train", "train the classifier and write a checkpoint");
    add_common(train, opt);
    CLI::App* attack = app.add_subcommand("attack", "craft one adversarial example");
    add_common(attack, opt);
    attack->add_option("--image", opt.image_path, "attack this PPM image");
    attack->add_option("--index", opt.dataset_index, "attack this test-split index");
    attack->add_option("--scenario", opt.scenario_index,
                       "scenario index supplying source/target classes (default 0)");
    attack->add_flag("--require-success", opt.require_success,
                     "exit with code 4 if the attack does not reach the target");
    CLI::App* sweep = app.add_subcommand("sweep", "run the filter x attack evaluation grid");
    add_common(sweep, opt);
    CLI::App* report = app.add_subcommand("report", "re-render plots from report.json");
    add_common(report, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(opt);
        if (attack->parsed()) return cmd_attack(opt);
        if (sweep->parsed()) return cmd_sweep(opt);
        if (report->parsed()) return cmd_report(opt);
    } catch (const attack_failed&) {
        std::cerr << "error: attack did not succeed (--require-success)\n";
        return 4;
    } catch (const fadml::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fadml::input_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fadml::training_error& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const fadml::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

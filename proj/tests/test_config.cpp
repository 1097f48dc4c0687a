#include "catch_amalgamated.hpp"

#include "fadml/config.hpp"

using fadml::attack_kind;
using fadml::experiment_config;
using fadml::filter_kind;

TEST_CASE("flat config parsing covers every section") {
    const std::string text = R"(
# experiment
seed = 7
out = runs/x
threads = 3

dataset.kind = synthetic
dataset.num_classes = 8
dataset.per_class = 40
dataset.image_size = 24

model.width_divisor = 4

train.learning_rate = 0.05
train.epochs = 3
train.batch_size = 16
train.weight_init_scale = 0.9

attack.kind = fademl
attack.base = bim
attack.epsilon = 0.08
attack.max_iters = 33
attack.targeted = true
attack.target = limit-60

filter.kind = lap
filter.np = 16

sweep.attacks = fgsm, fademl:bim
sweep.filters = identity, lap:4, lar:2
sweep.samples_per_cell = 12

scenarios = stop->limit-60, turn-left->turn-right
)";
    const experiment_config cfg = fadml::parse_flat_config(text);
    cfg.validate();
    CHECK(cfg.seed == 7);
    CHECK(cfg.out_dir == "runs/x");
    CHECK(cfg.threads == 3);
    CHECK(cfg.num_classes == 8);
    CHECK(cfg.per_class == 40);
    CHECK(cfg.image_size == 24);
    CHECK(cfg.width_divisor == 4);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.weight_init_scale == 0.9f);

    const fadml::attack_spec spec = cfg.make_primary_attack_spec();
    CHECK(spec.kind == attack_kind::fademl);
    CHECK(spec.base == attack_kind::bim);
    CHECK(spec.epsilon == 0.08f);
    CHECK(spec.max_iters == 33);
    CHECK(spec.step_size == 0.01f);  // fademl default lambda

    const fadml::filter_config fc = cfg.make_filter_config();
    CHECK(fc.kind == filter_kind::lap);
    CHECK(fc.np == 16);

    CHECK(cfg.sweep_attacks == std::vector<std::string>{"fgsm", "fademl:bim"});
    REQUIRE(cfg.sweep_filters.size() == 3);
    CHECK(cfg.sweep_filters[1].label() == "lap:4");
    CHECK(cfg.samples_per_cell == 12);

    REQUIRE(cfg.scenario_pairs.size() == 2);
    CHECK(cfg.scenario_pairs[0] == std::pair<std::string, std::string>{"stop", "limit-60"});
    CHECK(cfg.scenario_pairs[1] ==
          std::pair<std::string, std::string>{"turn-left", "turn-right"});
}

TEST_CASE("flat config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(fadml::parse_flat_config("dataste.kind = synthetic"), fadml::config_error);
    CHECK_THROWS_AS(fadml::parse_flat_config("train.epochs = banana"), fadml::config_error);
    CHECK_THROWS_AS(fadml::parse_flat_config("seed 42"), fadml::config_error);
    CHECK_THROWS_AS(fadml::parse_flat_config("scenarios = stop-limit-60"), fadml::config_error);
    CHECK_THROWS_AS(fadml::parse_flat_config("sweep.filters = box:2"), fadml::config_error);
}

TEST_CASE("config validation names the failing section") {
    experiment_config gtsrb;
    gtsrb.dataset_kind = "gtsrb";
    try {
        gtsrb.validate();
        FAIL("expected config_error");
    } catch (const fadml::config_error& e) {
        CHECK(std::string(e.what()).find("dataset.path") != std::string::npos);
    }

    experiment_config bad;
    bad.num_classes = 3;
    CHECK_THROWS_AS(bad.validate(), fadml::config_error);

    experiment_config bad_epochs;
    bad_epochs.epochs = 0;
    CHECK_THROWS_AS(bad_epochs.validate(), fadml::config_error);
}

TEST_CASE("json config is equivalent to the flat form") {
    const std::string flat_text = R"(
seed = 11
dataset.kind = synthetic
dataset.num_classes = 7
train.epochs = 2
attack.kind = bim
attack.epsilon = 0.1
sweep.attacks = bim, lbfgs
sweep.samples_per_cell = 9
scenarios = default
)";
    const nlohmann::json j = {
        {"seed", 11},
        {"dataset", {{"kind", "synthetic"}, {"num_classes", 7}}},
        {"train", {{"epochs", 2}}},
        {"attack", {{"kind", "bim"}, {"epsilon", 0.1}}},
        {"sweep", {{"attacks", {"bim", "lbfgs"}}, {"samples_per_cell", 9}}},
        {"scenarios", "default"},
    };
    const experiment_config a = fadml::parse_flat_config(flat_text);
    const experiment_config b = fadml::parse_json_config(j);
    CHECK(a.seed == b.seed);
    CHECK(a.num_classes == b.num_classes);
    CHECK(a.epochs == b.epochs);
    CHECK(a.sweep_attacks == b.sweep_attacks);
    CHECK(a.samples_per_cell == b.samples_per_cell);
    CHECK(a.scenarios_default == b.scenarios_default);
    const fadml::attack_spec sa = a.make_primary_attack_spec();
    const fadml::attack_spec sb = b.make_primary_attack_spec();
    CHECK(sa.epsilon == sb.epsilon);
    CHECK(sa.step_size == sb.step_size);
    CHECK(sa.step_size == Catch::Approx(0.01f));  // epsilon/10
}

TEST_CASE("json config scenario objects and strings both work") {
    const nlohmann::json j = {
        {"scenarios",
         nlohmann::json::array({nlohmann::json{{"source", "stop"}, {"target", "limit-60"}},
                                "turn-left->turn-right"})},
    };
    const experiment_config cfg = fadml::parse_json_config(j);
    REQUIRE(cfg.scenario_pairs.size() == 2);
    CHECK(cfg.scenario_pairs[0].first == "stop");
    CHECK(cfg.scenario_pairs[1].second == "turn-right");
}

TEST_CASE("attack defaults depend on the attack kind") {
    experiment_config cfg;
    const fadml::attack_spec bim = cfg.make_attack_spec("bim");
    CHECK(bim.epsilon == 0.05f);
    CHECK(bim.step_size == Catch::Approx(0.005f));
    CHECK(bim.max_iters == 50);
    const fadml::attack_spec fad = cfg.make_attack_spec("fademl:bim");
    CHECK(fad.step_size == 0.01f);
    CHECK(fad.eta == 1.0f);

    cfg.attack_step_size = 0.02f;
    CHECK(cfg.make_attack_spec("bim").step_size == 0.02f);
    CHECK(cfg.make_attack_spec("fademl:bim").step_size == 0.02f);
}

#include "catch_amalgamated.hpp"

#include <cstring>

#include "fadml/harness.hpp"
#include "fadml/plot.hpp"
#include "fadml/report_io.hpp"

using fadml::attack_kind;
using fadml::attack_spec;
using fadml::filter_config;
using fadml::filter_kind;
using fadml::linear_filter;
using fadml::network;
using fadml::tensor;

namespace {

// six-class toy: each class is a bright stripe at a distinct row of an
// 8x8 single-channel image; trivially learnable
struct lab_setup {
    network net{std::vector<int>{1, 8, 8}};
    fadml::labeled_dataset train, test;
};

lab_setup make_lab(int per_class = 12, std::uint64_t seed = 3) {
    lab_setup s;
    s.train.split = "train";
    s.test.split = "test";
    for (int c = 0; c < 6; ++c) {
        s.train.class_names.push_back("class-" + std::to_string(c));
        for (int i = 0; i < per_class; ++i) {
            fadml::rng r(fadml::derive_seed(seed, c, i));
            tensor img({1, 8, 8});
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    const float base = (y == c || y == c + 1) ? 0.85f : 0.15f;
                    img.at(0, y, x) = std::clamp(
                        base + static_cast<float>(r.gaussian(0, 0.04)), 0.0f, 1.0f);
                }
            (i < per_class - 4 ? s.train : s.test).images.push_back(std::move(img));
            (i < per_class - 4 ? s.train : s.test).labels.push_back(c);
        }
    }
    s.test.class_names = s.train.class_names;
    s.net.conv2d(4, 3, 1, 1).relu().maxpool(2, 2).dense(6).softmax();
    s.net.init_weights(9, 1.0f);
    fadml::train_config cfg;
    cfg.learning_rate = 0.25f;
    cfg.epochs = 40;
    cfg.batch_size = 8;
    cfg.seed = 4;
    s.net = fadml::train(s.net, s.train, cfg).net;
    return s;
}

}  // namespace

TEST_CASE("evaluate_pipeline respects the threat model split") {
    const lab_setup lab = make_lab();
    const tensor& x = lab.test.images[0];
    const linear_filter identity({filter_kind::identity, 0, 0}, {1, 8, 8});
    const linear_filter lar2({filter_kind::lar, 0, 2}, {1, 8, 8});

    const fadml::prediction tm1 =
        fadml::evaluate_pipeline(lab.net, identity, fadml::threat_model::tm1, x);
    const fadml::prediction tm2_id =
        fadml::evaluate_pipeline(lab.net, identity, fadml::threat_model::tm2, x);
    CHECK(tm1.probabilities == tm2_id.probabilities);

    const fadml::prediction tm2 =
        fadml::evaluate_pipeline(lab.net, lar2, fadml::threat_model::tm2, x);
    const fadml::prediction tm3 =
        fadml::evaluate_pipeline(lab.net, lar2, fadml::threat_model::tm3, x);
    CHECK(tm2.probabilities == tm3.probabilities);
}

TEST_CASE("top5 accuracy on a memorized six-class toy is 1.0") {
    const lab_setup lab = make_lab();
    CHECK(fadml::top5_accuracy(lab.net, nullptr, lab.test) == 1.0);
    CHECK_THROWS_AS(fadml::top5_accuracy(lab.net, nullptr, fadml::labeled_dataset{}),
                    fadml::input_error);
}

TEST_CASE("top5 accuracy of an untrained net on balanced 10-class noise is about 0.5") {
    network net({1, 8, 8});
    net.conv2d(3, 3, 1, 1).relu().dense(10).softmax();
    net.init_weights(123, 1.0f);
    fadml::labeled_dataset ds;
    for (int c = 0; c < 10; ++c) ds.class_names.push_back("c" + std::to_string(c));
    fadml::rng r(55);
    for (int i = 0; i < 1000; ++i) {
        tensor img({1, 8, 8});
        for (std::size_t k = 0; k < img.size(); ++k) img[k] = r.next_float();
        ds.images.push_back(std::move(img));
        ds.labels.push_back(i % 10);
    }
    const double acc = fadml::top5_accuracy(net, nullptr, ds, 2);
    CHECK(acc > 0.45);
    CHECK(acc < 0.55);
}

TEST_CASE("default scenarios mirror the five payload pairs") {
    const std::vector<std::string> names = fadml::synthetic_class_names();
    const std::vector<fadml::scenario> sc = fadml::default_scenarios(names);
    REQUIRE(sc.size() == 5);
    for (const fadml::scenario& s : sc) CHECK(s.source_class != s.target_class);
    // left->right and right->left are mutual inverses
    CHECK(sc[2].source_class == sc[3].target_class);
    CHECK(sc[2].target_class == sc[3].source_class);
    // stop and no-entry share the 60 km/h target
    CHECK(sc[0].target_class == sc[4].target_class);

    CHECK_THROWS_AS(fadml::default_scenarios({"a", "b", "c", "d", "e", "f"}),
                    fadml::config_error);
}

TEST_CASE("analyze_filter_impact produces a consistent deterministic report") {
    const lab_setup lab = make_lab();

    std::vector<attack_spec> attacks;
    attack_spec fgsm_spec;
    fgsm_spec.kind = attack_kind::fgsm;
    fgsm_spec.epsilon = 0.1f;
    attacks.push_back(fgsm_spec);
    attack_spec fad;
    fad.kind = attack_kind::fademl;
    fad.base = attack_kind::bim;
    fad.epsilon = 0.25f;
    fad.step_size = 0.02f;
    fad.max_iters = 25;
    attacks.push_back(fad);

    const std::vector<filter_config> filters = {{filter_kind::identity, 0, 0},
                                                {filter_kind::lap, 4, 0},
                                                {filter_kind::lar, 0, 1}};
    std::vector<fadml::scenario> scenarios = {{"c0->c3", 0, 3}, {"c2->c5", 2, 5}};

    fadml::sweep_options opts;
    opts.samples_per_cell = 4;
    opts.seed = 77;
    opts.threads = 2;
    const fadml::evaluation_report rep =
        fadml::analyze_filter_impact(lab.net, attacks, filters, scenarios, lab.test, opts);

    // cells = attacks x filters x threat models x scenarios
    CHECK(rep.cells.size() == 2 * 3 * 3 * 2);
    CHECK(rep.clean.size() == 3 * 3);

    for (const fadml::report_cell& c : rep.cells) {
        CHECK(c.n_samples == 4);
        CHECK(c.status == "ok");
        CHECK(c.success_rate >= 0.0);
        CHECK(c.success_rate <= 1.0);
        CHECK(c.eq3_cost >= -1.0);
        CHECK(c.eq3_cost <= 1.0);
        // report self-consistency: the rate equals the recount of outcomes
        double recount = 0;
        for (std::uint8_t s : c.sample_success) recount += s;
        CHECK(c.success_rate == Catch::Approx(recount / c.n_samples));
        // TM1 rows never involve the filter, so the gap vanishes
        if (c.tm == fadml::threat_model::tm1) CHECK(c.eq3_cost == 0.0);
    }

    // identity-filter columns equal the TM1-only run, metric for metric
    const filter_config identity{filter_kind::identity, 0, 0};
    for (const attack_spec& a : attacks) {
        for (const fadml::scenario& s : scenarios) {
            const fadml::report_cell& tm1 =
                rep.cell(a.label(), identity, fadml::threat_model::tm1, s.name);
            const fadml::report_cell& tm2 =
                rep.cell(a.label(), identity, fadml::threat_model::tm2, s.name);
            CHECK(tm1.success_rate == tm2.success_rate);
            CHECK(tm1.mean_confidence == tm2.mean_confidence);
            CHECK(tm1.top5_acc == tm2.top5_acc);
            CHECK(tm2.eq3_cost == 0.0);
        }
    }

    // TM2 and TM3 rows are identical
    for (const attack_spec& a : attacks)
        for (const filter_config& f : filters)
            for (const fadml::scenario& s : scenarios) {
                const fadml::report_cell& tm2 =
                    rep.cell(a.label(), f, fadml::threat_model::tm2, s.name);
                const fadml::report_cell& tm3 =
                    rep.cell(a.label(), f, fadml::threat_model::tm3, s.name);
                CHECK(tm2.success_rate == tm3.success_rate);
                CHECK(tm2.eq3_cost == tm3.eq3_cost);
            }

    // byte-identical reruns, independent of thread count
    fadml::sweep_options opts1 = opts;
    opts1.threads = 1;
    const fadml::evaluation_report rep1 =
        fadml::analyze_filter_impact(lab.net, attacks, filters, scenarios, lab.test, opts1);
    CHECK(fadml::report_csv(rep) == fadml::report_csv(rep1));

    // row count: header + cells
    const std::string csv = fadml::report_csv(rep);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3 * 3 * 2);

    // json round trip preserves the plotting surface
    const fadml::evaluation_report back = fadml::parse_report_json(fadml::report_json(rep));
    REQUIRE(back.cells.size() == rep.cells.size());
    for (std::size_t i = 0; i < rep.cells.size(); ++i) {
        CHECK(back.cells[i].attack == rep.cells[i].attack);
        CHECK(back.cells[i].success_rate == rep.cells[i].success_rate);
        CHECK(back.cells[i].filter == rep.cells[i].filter);
    }
    REQUIRE(back.clean.size() == rep.clean.size());
    CHECK(back.clean[0].top5_acc == rep.clean[0].top5_acc);

    // plots render with a clean curve plus one per attack
    const std::string svg = fadml::plot_top5_vs_strength(rep, filter_kind::lar);
    const auto count_polylines = [](const std::string& s) {
        std::size_t n = 0, pos = 0;
        while ((pos = s.find("<polyline", pos)) != std::string::npos) {
            ++n;
            pos += 9;
        }
        return n;
    };
    CHECK(count_polylines(svg) == 1 + attacks.size());
    CHECK(count_polylines(fadml::plot_success_by_filter(rep)) == attacks.size());
}

TEST_CASE("sweep cells isolate per-sample failures") {
    const lab_setup lab = make_lab();
    std::vector<attack_spec> attacks;
    attack_spec fad;
    fad.kind = attack_kind::fademl;
    fad.base = attack_kind::fgsm;
    attacks.push_back(fad);
    // scenario targeting a class with no test samples: fademl cannot pick a
    // target-class sample, so every cell records the failure and moves on
    std::vector<fadml::scenario> scenarios = {{"c0->missing", 0, 5}};
    fadml::labeled_dataset test = lab.test;
    for (std::size_t i = 0; i < test.labels.size();) {
        if (test.labels[i] == 5) {
            test.labels.erase(test.labels.begin() + i);
            test.images.erase(test.images.begin() + i);
        } else {
            ++i;
        }
    }
    fadml::sweep_options opts;
    opts.samples_per_cell = 3;
    const fadml::evaluation_report rep = fadml::analyze_filter_impact(
        lab.net, attacks, {{filter_kind::identity, 0, 0}}, scenarios, test, opts);
    REQUIRE(rep.cells.size() == 3);
    for (const fadml::report_cell& c : rep.cells) {
        CHECK(c.n_samples == 0);
        CHECK(c.status != "ok");
    }
}

#include "catch_amalgamated.hpp"

#include <cstring>

#include "fadml/net.hpp"
#include "oracle.hpp"

using fadml::network;
using fadml::tensor;

namespace {

tensor random_image(const std::vector<int>& shape, std::uint64_t seed) {
    fadml::rng r(seed);
    tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.next_float();
    return t;
}

network tiny_net(std::uint64_t seed, int classes = 3) {
    network net({2, 4, 4});
    net.conv2d(3, 3, 1, 1).relu().maxpool(2, 2).dense(classes).softmax();
    net.init_weights(seed, 1.0f);
    return net;
}

}  // namespace

TEST_CASE("vgg-mini channel progression follows the width divisor") {
    const auto channels = [](const network& net) {
        std::vector<int> out;
        for (const fadml::layer& l : net.layers())
            if (l.kind == fadml::layer_kind::conv2d) out.push_back(l.out_channels);
        return out;
    };
    network full = fadml::build_vgg_mini({3, 32, 32}, 10, 1, 1);
    CHECK(channels(full) == std::vector<int>{64, 128, 256, 512, 512});
    network div8 = fadml::build_vgg_mini({3, 32, 32}, 10, 8, 1);
    CHECK(channels(div8) == std::vector<int>{8, 16, 32, 64, 64});
    network div16 = fadml::build_vgg_mini({3, 32, 32}, 10, 16, 1);
    CHECK(channels(div16) == std::vector<int>{4, 8, 16, 32, 32});

    CHECK(div8.num_classes() == 10);
    CHECK(div8.layers().back().kind == fadml::layer_kind::softmax);
}

TEST_CASE("vgg-mini rejects shapes that cannot survive the poolings") {
    CHECK_THROWS_AS(fadml::build_vgg_mini({3, 8, 8}, 10, 8), fadml::config_error);
    CHECK_THROWS_AS(fadml::build_vgg_mini({3, 32, 32}, 5, 8), fadml::config_error);
    CHECK_THROWS_AS(fadml::build_vgg_mini({3, 32, 32}, 10, 3), fadml::config_error);
    // a pooling that genuinely exhausts the spatial size names the layer
    network n({1, 3, 3});
    CHECK_THROWS_WITH(n.maxpool(4, 4, "block 1"), Catch::Matchers::ContainsSubstring("block 1"));
}

TEST_CASE("forward with zero final dense gives the uniform distribution") {
    network net({1, 4, 4});
    net.dense(10).softmax();
    // weights stay zero-initialized
    const fadml::prediction p = fadml::forward(net, random_image({1, 4, 4}, 1));
    for (float prob : p.probabilities) CHECK(prob == p.probabilities[0]);
    CHECK(p.probabilities[0] == Catch::Approx(0.1).margin(1e-6));
}

TEST_CASE("softmax output is a probability distribution") {
    network net = tiny_net(99);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const fadml::prediction p = fadml::forward(net, random_image({2, 4, 4}, 10 + s));
        double sum = 0.0;
        for (float prob : p.probabilities) {
            CHECK(prob >= 0.0f);
            CHECK(prob <= 1.0f);
            sum += prob;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-5);
    }
}

TEST_CASE("forward matches the straight-line double-precision reference") {
    network net = tiny_net(7);
    const tensor x = random_image({2, 4, 4}, 21);
    const fadml::prediction p = fadml::forward(net, x);
    const std::vector<double> ref = oracle::ref_forward(net, oracle::to_doubles(x));
    REQUIRE(p.probabilities.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(p.probabilities[i] == Catch::Approx(ref[i]).margin(1e-4));
}

TEST_CASE("forward validates input shape and class ids") {
    network net = tiny_net(3);
    CHECK_THROWS_AS(fadml::forward(net, tensor({2, 5, 5})), fadml::input_error);
    CHECK_THROWS_AS(fadml::loss(net, random_image({2, 4, 4}, 5), 17), fadml::input_error);
    CHECK_THROWS_AS(fadml::loss(net, random_image({2, 4, 4}, 5), -1), fadml::input_error);
}

TEST_CASE("loss values for near-certain and uniform predictions") {
    network net({1, 1, 1});
    net.dense(10).softmax();
    SECTION("uniform: -log(1/10)") {
        const float l = fadml::loss(net, tensor({1, 1, 1}, {0.5f}), 4);
        CHECK(l == Catch::Approx(std::log(10.0)).margin(1e-4));
    }
    SECTION("probability one: loss vanishes") {
        net.layers()[0].bias[4] = 60.0f;  // saturate the softmax at class 4
        const float l = fadml::loss(net, tensor({1, 1, 1}, {0.5f}), 4);
        CHECK(std::fabs(l) <= 1e-6f);
    }
}

TEST_CASE("loss matches the reference on a seeded tiny net") {
    network net = tiny_net(11);
    const tensor x = random_image({2, 4, 4}, 31);
    CHECK(fadml::loss(net, x, 1) ==
          Catch::Approx(oracle::ref_loss(net, oracle::to_doubles(x), 1)).margin(1e-3));
}

TEST_CASE("input gradient matches central finite differences") {
    // a few shapes and depths, all within the small-net oracle regime
    struct arch {
        std::vector<int> shape;
        int variant;
    };
    const arch archs[] = {{{1, 4, 4}, 0}, {{2, 6, 6}, 1}, {{3, 8, 8}, 2}, {{1, 5, 5}, 3}};
    for (const arch& a : archs) {
        network net(a.shape);
        switch (a.variant) {
            case 0: net.dense(3).softmax(); break;
            case 1: net.conv2d(3, 3, 1, 1).relu().dense(4).softmax(); break;
            case 2: net.conv2d(4, 3, 1, 1).relu().maxpool(2, 2).dense(5).softmax(); break;
            case 3: net.conv2d(2, 3, 1, 0).relu().dense(3).softmax(); break;
        }
        net.init_weights(100 + a.variant, 1.0f);
        const tensor x = random_image(a.shape, 200 + a.variant);
        const tensor g = fadml::input_gradient(net, x, 1);
        const tensor fd = oracle::fd_input_gradient(net, x, 1);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (std::fabs(g[i]) <= 1e-4f) continue;
            CHECK(std::fabs(g[i] - fd[i]) / std::fabs(g[i]) < 1e-2);
        }
    }
}

TEST_CASE("constant-zero weights give a zero input gradient") {
    network net({1, 4, 4});
    net.conv2d(2, 3, 1, 1).relu().dense(3).softmax();
    const tensor g = fadml::input_gradient(net, random_image({1, 4, 4}, 8), 0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0f);
}

TEST_CASE("dense-softmax gradient matches the closed form") {
    // single pixel, two classes: dJ/dx = sum_i (p_i - onehot_i) * W_i
    network net({1, 1, 1});
    net.dense(2).softmax();
    net.layers()[0].weights = tensor({2, 1}, {1.3f, -0.4f});
    net.layers()[0].bias = tensor({2}, {0.1f, -0.2f});
    const tensor x({1, 1, 1}, {0.7f});
    const fadml::prediction p = fadml::forward(net, x);
    const int target = 0;
    const double analytic = (p.probabilities[0] - 1.0) * 1.3 + p.probabilities[1] * -0.4;
    const tensor g = fadml::input_gradient(net, x, target);
    CHECK(g[0] == Catch::Approx(analytic).margin(1e-5));
}

TEST_CASE("top_k ordering is total under ties") {
    fadml::prediction p;
    p.probabilities = {0.2f, 0.3f, 0.2f, 0.3f};
    const auto top = p.top_k(4);
    CHECK(top[0].first == 1);
    CHECK(top[1].first == 3);
    CHECK(top[2].first == 0);
    CHECK(top[3].first == 2);
    // permuting the tied classes does not change the reported id order
    fadml::prediction q;
    q.probabilities = {0.3f, 0.2f, 0.3f, 0.2f};
    const auto qtop = q.top_k(4);
    CHECK(qtop[0].first == 0);
    CHECK(qtop[1].first == 2);
}

TEST_CASE("training changes parameters and is bit-deterministic") {
    const std::vector<int> shape{1, 4, 4};
    std::vector<tensor> images = {random_image(shape, 1), random_image(shape, 2)};
    std::vector<int> labels = {0, 1};

    fadml::train_config cfg;
    cfg.learning_rate = 0.1f;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.seed = 5;

    CHECK_THROWS_AS(
        [&] {
            fadml::train_config bad = cfg;
            bad.epochs = 0;
            bad.validate();
        }(),
        fadml::config_error);

    network base({1, 4, 4});
    base.conv2d(2, 3, 1, 1).relu().dense(2).softmax();
    base.init_weights(17, 1.0f);

    const fadml::train_result r1 = fadml::train(base, images, labels, cfg);
    bool changed = false;
    for (std::size_t li = 0; li < base.layers().size(); ++li)
        for (std::size_t i = 0; i < base.layers()[li].weights.size(); ++i)
            changed |= base.layers()[li].weights[i] != r1.net.layers()[li].weights[i];
    CHECK(changed);
    CHECK(r1.trace.size() == 1);

    const fadml::train_result r2 = fadml::train(base, images, labels, cfg);
    const fadml::train_result r4 = fadml::train(base, images, labels, cfg, 4);
    for (std::size_t li = 0; li < base.layers().size(); ++li) {
        const auto& w1 = r1.net.layers()[li].weights.buffer();
        const auto& w2 = r2.net.layers()[li].weights.buffer();
        const auto& w4 = r4.net.layers()[li].weights.buffer();
        REQUIRE(w1.size() == w2.size());
        CHECK(std::memcmp(w1.data(), w2.data(), w1.size() * sizeof(float)) == 0);
        CHECK(std::memcmp(w1.data(), w4.data(), w1.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("training solves a linearly separable toy") {
    // two gaussian-ish blobs on a 2-value input, certified separable by a
    // perceptron before asking the network to fit them
    fadml::rng r(42);
    std::vector<tensor> images;
    std::vector<int> labels;
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 40; ++i) {
        const int label = i % 2;
        const double cx = label ? 0.75 : 0.25;
        const double cy = label ? 0.25 : 0.75;
        const double px = cx + r.gaussian(0.0, 0.05);
        const double py = cy + r.gaussian(0.0, 0.05);
        images.push_back(tensor({1, 1, 2}, {static_cast<float>(px), static_cast<float>(py)}));
        labels.push_back(label);
        pts.push_back({px, py});
    }
    REQUIRE(oracle::perceptron_separable(pts, labels));

    network net({1, 1, 2});
    net.dense(2).softmax();
    net.init_weights(3, 1.0f);
    fadml::train_config cfg;
    cfg.learning_rate = 0.5f;
    cfg.epochs = 50;
    cfg.batch_size = 4;
    cfg.seed = 9;
    const fadml::train_result res = fadml::train(net, images, labels, cfg);
    int correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (fadml::forward(res.net, images[i]).top1() == labels[i]) ++correct;
    CHECK(correct == static_cast<int>(images.size()));
}

TEST_CASE("training divergence raises a training error with the epoch") {
    std::vector<tensor> images = {random_image({1, 4, 4}, 3), random_image({1, 4, 4}, 4)};
    std::vector<int> labels = {0, 1};
    network net({1, 4, 4});
    net.conv2d(2, 3, 1, 1).relu().dense(2).softmax();
    net.init_weights(1, 1.0f);
    fadml::train_config cfg;
    cfg.learning_rate = 1e30f;  // guaranteed blow-up
    cfg.epochs = 5;
    cfg.batch_size = 1;
    try {
        fadml::train(net, images, labels, cfg);
        FAIL("expected training_error");
    } catch (const fadml::training_error& e) {
        CHECK(e.epoch >= 0);
    }
}

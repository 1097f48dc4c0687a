#include "catch_amalgamated.hpp"

#include "fadml/rng.hpp"
#include "fadml/tensor.hpp"

using fadml::tensor;

TEST_CASE("tensor shape and data invariants") {
    tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.shape() == std::vector<int>{2, 3, 4});
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0f);

    CHECK_THROWS_AS(tensor({2, 0, 4}), fadml::input_error);
    CHECK_THROWS_AS(tensor(std::vector<int>{}), fadml::input_error);
    CHECK_THROWS_AS(tensor({2, 2}, std::vector<float>{1.0f}), fadml::input_error);
}

TEST_CASE("tensor arithmetic checks shapes") {
    tensor a({2, 2}, {1, 2, 3, 4});
    tensor b({4});
    CHECK_THROWS_AS(a += b, fadml::input_error);
    tensor c({2, 2}, {1, 1, 1, 1});
    a += c;
    CHECK(a[0] == 2.0f);
    CHECK(a[3] == 5.0f);
}

TEST_CASE("norms and clipping") {
    tensor t({3}, {3.0f, -4.0f, 0.0f});
    CHECK(t.l2_norm() == Catch::Approx(5.0));
    CHECK(t.linf_norm() == 4.0f);
    t.clip(-1.0f, 1.0f);
    CHECK(t[0] == 1.0f);
    CHECK(t[1] == -1.0f);
}

TEST_CASE("clipped_sum applies scaling and [0,1] clamp") {
    tensor x({2}, {0.9f, 0.1f});
    tensor n({2}, {0.5f, -0.5f});
    tensor out = fadml::clipped_sum(x, n, 1.0f);
    CHECK(out[0] == 1.0f);
    CHECK(out[1] == Catch::Approx(0.0f).margin(1e-7));
    tensor half = fadml::clipped_sum(x, n, 0.2f);
    CHECK(half[0] == Catch::Approx(1.0f).margin(1e-6));
    CHECK(half[1] == Catch::Approx(0.0f).margin(1e-6));
    tensor zero = fadml::clipped_sum(x, n, 0.0f);
    CHECK(zero[0] == x[0]);
    CHECK(zero[1] == x[1]);
}

TEST_CASE("rng streams are deterministic and seed-separated") {
    fadml::rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        const double va = a.next_double();
        CHECK(va == b.next_double());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    bool differs = false;
    fadml::rng a2(123);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);

    CHECK(fadml::derive_seed(1, 2, 3) != fadml::derive_seed(1, 3, 2));
}

TEST_CASE("deterministic shuffle is engine-defined") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> v2 = v1;
    fadml::rng r1(7), r2(7);
    fadml::deterministic_shuffle(v1, r1);
    fadml::deterministic_shuffle(v2, r2);
    CHECK(v1 == v2);
}

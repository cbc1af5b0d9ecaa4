#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <vector>

#include "sim/common.hpp"
#include "sim/rng.hpp"
#include "sim/types.hpp"

using namespace sim;

namespace {

PiecewiseLinearActivation identity_pl() {
    return PiecewiseLinearActivation({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, 0.5, 2.0);
}

Dataset tiny_dataset(std::vector<std::vector<double>> xs, std::vector<double> ys) {
    const std::size_t d = xs[0].size();
    std::vector<double> flat;
    for (const auto& row : xs) flat.insert(flat.end(), row.begin(), row.end());
    return Dataset(d, std::move(flat), std::move(ys));
}

}  // namespace

TEST_CASE("activation evaluation interpolates and extrapolates") {
    const auto id = identity_pl();
    CHECK(id(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(id(0.0) == 0.0);
    CHECK(id(-0.25) == doctest::Approx(-0.25).epsilon(1e-15));

    // End-segment slope continues beyond the knot range.
    PiecewiseLinearActivation steep({0.0, 1.0}, {0.0, 2.0}, 0.5, 2.0);
    CHECK(steep(3.0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(steep(0.0) == 0.0);

    // Anchor-at-edge extrapolation: slope a to the right, 0 to the left.
    PiecewiseLinearActivation left({-2.0, 0.0}, {-1.0, 0.0}, 0.25, 1.0);
    CHECK(left(1.0) == doctest::Approx(0.25).epsilon(1e-15));
    PiecewiseLinearActivation right({0.0, 1.0}, {0.0, 1.0}, 0.25, 1.0);
    CHECK(right(-2.0) == 0.0);
}

TEST_CASE("default-constructed activation is the zero function") {
    PiecewiseLinearActivation u;
    CHECK(u(0.0) == 0.0);
    CHECK(u(-3.0) == 0.0);
    CHECK(u(5.0) == 0.0);
    CHECK(u.integral(2.0) == 0.0);
    CHECK(u.lower_slope() == 0.0);
    CHECK(u.lipschitz() == 0.0);
}

TEST_CASE("activation validation") {
    // Equal knots with equal values collapse; unequal values are rejected.
    PiecewiseLinearActivation ok({0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}, 0.5, 2.0);
    CHECK(ok.knots().size() == 2);
    CHECK_THROWS_AS(
        PiecewiseLinearActivation({0.0, 1.0, 1.0}, {0.0, 1.0, 1.5}, 0.5, 2.0),
        std::invalid_argument);
    // Slope above b.
    CHECK_THROWS_AS(PiecewiseLinearActivation({0.0, 1.0}, {0.0, 3.0}, 0.5, 2.0),
                    std::invalid_argument);
    // Slope below a on the nonnegative side.
    CHECK_THROWS_AS(PiecewiseLinearActivation({0.0, 1.0}, {0.0, 0.1}, 0.5, 2.0),
                    std::invalid_argument);
    // Missing anchor value.
    CHECK_THROWS_AS(PiecewiseLinearActivation({0.0, 1.0}, {0.5, 1.5}, 0.5, 2.0),
                    std::invalid_argument);
}

TEST_CASE("slope invariants hold on a grid") {
    const auto u = PiecewiseLinearActivation({-2.0, -1.0, 0.0, 0.5, 2.0},
                                             {-0.5, -0.5, 0.0, 0.3, 1.4}, 0.5, 2.0);
    const double a = 0.5, b = 2.0;
    for (double z = -3.0; z <= 3.0; z += 0.125) {
        for (double zp = -3.0; zp <= z; zp += 0.125) {
            const double dv = u(z) - u(zp);
            CHECK(dv >= -1e-12);
            CHECK(dv <= b * (z - zp) + 1e-12);
            if (zp >= 0.0) CHECK(dv >= a * (z - zp) - 1e-12);
        }
    }
}

TEST_CASE("l2_loss basics") {
    const auto id = identity_pl();
    Hypothesis h{{1.0, 0.0}, id};
    SUBCASE("single unit residual") {
        const auto data = tiny_dataset({{1.0, 0.0}}, {0.0});
        CHECK(l2_loss(h, data) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("mean of squared residuals") {
        const auto data = tiny_dataset({{1.0, 0.0}, {3.0, 0.0}}, {0.0, 0.0});
        CHECK(l2_loss(h, data) == doctest::Approx(5.0).epsilon(1e-15));
    }
    SUBCASE("realizable data gives zero") {
        const auto data = tiny_dataset({{0.25, 1.0}, {-0.5, 2.0}}, {0.25, -0.5});
        CHECK(l2_loss(h, data) == 0.0);
    }
    SUBCASE("permutation invariance") {
        const auto d1 = tiny_dataset({{1.0, 0.0}, {0.5, 1.0}, {-2.0, 3.0}},
                                     {0.2, -0.1, 0.4});
        const auto d2 = tiny_dataset({{-2.0, 3.0}, {1.0, 0.0}, {0.5, 1.0}},
                                     {0.4, 0.2, -0.1});
        CHECK(l2_loss(h, d1) == doctest::Approx(l2_loss(h, d2)).epsilon(1e-14));
    }
    SUBCASE("dimension mismatch") {
        const auto data = tiny_dataset({{1.0, 0.0, 0.0}}, {0.0});
        CHECK_THROWS_AS(l2_loss(h, data), std::invalid_argument);
    }
}

TEST_CASE("misalignment") {
    const std::vector<double> wstar{1.0, 0.0};
    CHECK(misalignment(wstar, std::vector<double>{2.0, 0.0}) == 0.0);
    CHECK(misalignment(wstar, std::vector<double>{0.0, 1.0}) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(misalignment(wstar, std::vector<double>{1.0, 1.0}) ==
          doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    // w = 0 returns ||wstar||.
    CHECK(misalignment(wstar, std::vector<double>{0.0, 0.0}) == 1.0);
    // Scale invariance and the global bound.
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> ws(3), w(3);
        for (auto& v : ws) v = rng.normal();
        for (auto& v : w) v = rng.normal();
        const double base = misalignment(ws, w);
        const double c = rng.uniform_open() * 4.0 - 2.0;
        if (c != 0.0) {
            std::vector<double> scaled(w);
            scale(scaled, c);
            CHECK(misalignment(ws, scaled) == doctest::Approx(base).epsilon(1e-9));
        }
        CHECK(base <= norm2(ws) + 1e-12);
    }
}

TEST_CASE("angle") {
    const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, ne1{-1.0, 0.0};
    CHECK(angle(e1, e1) == 0.0);
    CHECK(angle(e1, e2) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
    CHECK(angle(e1, ne1) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
    CHECK_THROWS_AS(angle(e1, std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("config finalize derives defaults") {
    LearnerConfig c;  // a=0.5 b=1 L=0.05 R=1
    c.finalize();
    CHECK(c.mu == doctest::Approx(0.0125).epsilon(1e-15));
    CHECK(c.eta_init == doctest::Approx(0.0125 * 0.0125 * 0.0125 / 128.0).epsilon(1e-15));
    CHECK(c.eta_opt == doctest::Approx(0.0125 / 4.0).epsilon(1e-15));

    LearnerConfig e;
    e.a = 1.0;
    e.b = 2.0;
    e.L = 0.5;
    e.R = 0.5;
    e.finalize();
    CHECK(e.mu == doctest::Approx(0.5 * 0.0625 / 2.0).epsilon(1e-15));

    // Explicit values are kept, including a legal zero step.
    LearnerConfig z;
    z.mu = 1.0;
    z.eta_opt = 0.0;
    z.finalize();
    CHECK(z.mu == 1.0);
    CHECK(z.eta_opt == 0.0);
    CHECK(z.eta_init > 0.0);
}

TEST_CASE("config finalize validation") {
    auto expect_bad = [](auto&& mutate) {
        LearnerConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.finalize(), config_error);
    };
    expect_bad([](LearnerConfig& c) { c.a = 0.0; });
    expect_bad([](LearnerConfig& c) { c.a = 1.5; });
    expect_bad([](LearnerConfig& c) { c.b = 0.5; });
    expect_bad([](LearnerConfig& c) { c.L = 0.0; });
    expect_bad([](LearnerConfig& c) { c.R = 2.0; });
    expect_bad([](LearnerConfig& c) { c.W = 0.0; });
    expect_bad([](LearnerConfig& c) { c.eps = 0.0; });
    expect_bad([](LearnerConfig& c) { c.eps = 1.0; });
    expect_bad([](LearnerConfig& c) { c.delta = 1.0; });
    expect_bad([](LearnerConfig& c) { c.mu = 2.0; });
    expect_bad([](LearnerConfig& c) { c.J_cap = 0; });
    expect_bad([](LearnerConfig& c) { c.m_batch = 0; });
    expect_bad([](LearnerConfig& c) { c.kkt_tol = 0.0; });
}

TEST_CASE("pairwise and compensated sums agree with exact sums") {
    Rng rng(11);
    std::vector<double> xs(10001);
    for (auto& v : xs) v = rng.normal();
    double naive = 0.0;
    for (double v : xs) naive += v;
    const double pw = pairwise_sum(xs);
    CompensatedSum cs;
    for (double v : xs) cs.add(v);
    CHECK(pw == doctest::Approx(naive).epsilon(1e-10));
    CHECK(cs.value() == doctest::Approx(pw).epsilon(1e-14));
    // Determinism: same input, same bits.
    CHECK(pairwise_sum(xs) == pw);
}

TEST_CASE("parallel_for covers all indices and rethrows") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    parallel_for(0, 4, [&](std::size_t) { FAIL("must not be called"); });
    CHECK_THROWS_AS(parallel_for(16, 3,
                                 [&](std::size_t i) {
                                     if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("dataset storage and resize") {
    auto data = tiny_dataset({{1.0, 2.0}, {3.0, 4.0}}, {5.0, 6.0});
    CHECK(data.dim() == 2);
    CHECK(data.size() == 2);
    CHECK(data.x(1)[0] == 3.0);
    CHECK(data.y(1) == 6.0);
    CHECK(data.sample(0).x[1] == 2.0);
    Dataset buf;
    buf.resize(3, 4);
    CHECK(buf.dim() == 3);
    CHECK(buf.size() == 4);
    CHECK(buf.mutable_features().size() == 12);
}

TEST_CASE("rng streams are deterministic and decorrelated") {
    Rng a = Rng::stream(7, 0x1234, 1, 2, 3);
    Rng b = Rng::stream(7, 0x1234, 1, 2, 3);
    Rng c = Rng::stream(7, 0x1234, 1, 2, 4);
    bool same_ab = true, same_ac = true;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
        same_ab = same_ab && va == vb;
        same_ac = same_ac && va == vc;
    }
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
}

TEST_CASE("normal sampler moments and tails") {
    Rng rng(101);
    const std::size_t n = 400000;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::size_t beyond3 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng.normal();
        s1 += z;
        s2 += z * z;
        s3 += z * z * z;
        s4 += z * z * z * z;
        if (std::abs(z) > 3.0) ++beyond3;
    }
    const double nd = static_cast<double>(n);
    CHECK(std::abs(s1 / nd) < 0.01);
    CHECK(s2 / nd == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(s3 / nd) < 0.05);
    CHECK(s4 / nd == doctest::Approx(3.0).epsilon(0.05));
    // P(|Z| > 3) = 0.0027.
    CHECK(static_cast<double>(beyond3) / nd == doctest::Approx(0.0027).epsilon(0.25));
}

TEST_CASE("laplace and logistic samplers have unit-variance scalings") {
    Rng rng(202);
    const std::size_t n = 300000;
    double sl = 0, sl2 = 0, sg = 0, sg2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = rng.laplace() / std::sqrt(2.0);
        const double g = rng.logistic() * (std::sqrt(3.0) / std::numbers::pi);
        sl += l;
        sl2 += l * l;
        sg += g;
        sg2 += g * g;
    }
    const double nd = static_cast<double>(n);
    CHECK(std::abs(sl / nd) < 0.01);
    CHECK(sl2 / nd == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(sg / nd) < 0.01);
    CHECK(sg2 / nd == doctest::Approx(1.0).epsilon(0.02));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "sim/monotone_fit.hpp"
#include "sim/rng.hpp"
#include "sim/types.hpp"

using namespace sim;

namespace {

ChainQP random_chain(Rng& rng, std::size_t max_n) {
    ChainQP p;
    const std::size_t n = 1 + rng.next_u64() % max_n;
    p.targets.resize(n);
    for (auto& t : p.targets) t = -5.0 + 10.0 * rng.uniform();
    p.anchor = rng.next_u64() % n;
    const double a = 1e-6 + (1.0 - 1e-6) * rng.uniform();
    const double b = 1.0 + 9.0 * rng.uniform();
    p.lowers.resize(n - 1);
    p.uppers.resize(n - 1);
    for (std::size_t s = 0; s + 1 < n; ++s) {
        const double dz = 0.05 + 2.0 * rng.uniform();
        p.lowers[s] = (rng.next_u64() & 1) ? a * dz : 0.0;
        p.uppers[s] = b * dz;
    }
    return p;
}

double objective_at(const ChainQP& p, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (v[i] - p.targets[i]) * (v[i] - p.targets[i]);
    return s;
}

}  // namespace

TEST_CASE("chain solver on pinned instances") {
    SUBCASE("anchor-only chain") {
        ChainQP p;
        p.targets = {3.0};
        p.anchor = 0;
        const auto r = solve_chain_qp(p, 1e-9);
        CHECK(r.values == std::vector<double>{0.0});
        CHECK(r.objective == doctest::Approx(9.0).epsilon(1e-14));
    }
    SUBCASE("two free nodes share the slack") {
        ChainQP p;
        p.targets = {0.0, 2.0, 1.0};
        p.lowers = {0.1, 0.1};
        p.uppers = {10.0, 10.0};
        p.anchor = 0;
        const auto r = solve_chain_qp(p, 1e-9);
        REQUIRE(r.values.size() == 3);
        CHECK(r.values[0] == 0.0);
        CHECK(r.values[1] == doctest::Approx(1.45).epsilon(1e-10));
        CHECK(r.values[2] == doctest::Approx(1.55).epsilon(1e-10));
        CHECK(r.objective == doctest::Approx(0.605).epsilon(1e-10));
    }
    SUBCASE("upper band active") {
        ChainQP p;
        p.targets = {0.0, 5.0};
        p.lowers = {0.0};
        p.uppers = {1.0};
        p.anchor = 0;
        const auto r = solve_chain_qp(p, 1e-9);
        CHECK(r.values[0] == 0.0);
        CHECK(r.values[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.objective == doctest::Approx(16.0).epsilon(1e-10));
    }
}

TEST_CASE("oracle agrees on the pinned instances and rejects bad input") {
    ChainQP p1;
    p1.targets = {3.0};
    p1.anchor = 0;
    ChainQP p2;
    p2.targets = {0.0, 2.0, 1.0};
    p2.lowers = {0.1, 0.1};
    p2.uppers = {10.0, 10.0};
    p2.anchor = 0;
    ChainQP p3;
    p3.targets = {0.0, 5.0};
    p3.lowers = {0.0};
    p3.uppers = {1.0};
    p3.anchor = 0;
    for (const auto& p : {p1, p2, p3}) {
        const auto fast = solve_chain_qp(p, 1e-9);
        const auto slow = brute_fit_oracle(p, 1e-9);
        REQUIRE(fast.values.size() == slow.values.size());
        for (std::size_t i = 0; i < fast.values.size(); ++i)
            CHECK(fast.values[i] == doctest::Approx(slow.values[i]).epsilon(1e-6));
        CHECK(fast.objective == doctest::Approx(slow.objective).epsilon(1e-6));
    }

    ChainQP infeasible;
    infeasible.targets = {0.0, 1.0};
    infeasible.lowers = {2.0};
    infeasible.uppers = {1.0};
    infeasible.anchor = 0;
    CHECK_THROWS_AS(brute_fit_oracle(infeasible, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(solve_chain_qp(infeasible, 1e-9), std::invalid_argument);

    ChainQP big;
    big.targets.assign(11, 0.0);
    big.lowers.assign(10, 0.0);
    big.uppers.assign(10, 1.0);
    big.anchor = 0;
    CHECK_THROWS_AS(brute_fit_oracle(big, 1e-9), std::invalid_argument);
}

TEST_CASE("interior optimum equals the anchored least-squares shift") {
    // Wide bands so no constraint is active: optimum is targets shifted to
    // put the anchor at zero... except the anchor equality couples nothing
    // else, so each free value sits at its own target.
    ChainQP p;
    p.targets = {-0.1, 0.0, 0.2};
    p.lowers = {-10.0, -10.0};
    p.uppers = {10.0, 10.0};
    p.anchor = 1;
    const auto r = solve_chain_qp(p, 1e-9);
    CHECK(r.values[0] == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(r.values[1] == 0.0);
    CHECK(r.values[2] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.objective == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solver matches oracle on random instances") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_chain(rng, 8);
        const auto fast = solve_chain_qp(p, 1e-9);
        const auto slow = brute_fit_oracle(p, 1e-9);
        REQUIRE(fast.values.size() == slow.values.size());
        for (std::size_t i = 0; i < fast.values.size(); ++i)
            CHECK(std::abs(fast.values[i] - slow.values[i]) <= 1e-6);
        CHECK(std::abs(fast.objective - slow.objective) <= 1e-6);
        CHECK(fast.values[p.anchor] == 0.0);
        CHECK(fast.kkt_residual <= 1e-7);
    }
}

TEST_CASE("fit_activation pinned examples") {
    SUBCASE("feasible data is interpolated exactly") {
        const std::vector<double> z{-1.0, 0.0, 1.0}, y{-1.0, 0.0, 1.0};
        const auto u = fit_activation(z, y, 0.5, 2.0, 1e-9);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(u(z[i]) == doctest::Approx(y[i]).epsilon(1e-12));
    }
    SUBCASE("two-point compromise") {
        const std::vector<double> z{0.0, 1.0, 2.0}, y{0.0, 2.0, 1.0};
        const auto u = fit_activation(z, y, 0.1, 10.0, 1e-9);
        CHECK(u(0.0) == 0.0);
        CHECK(u(1.0) == doctest::Approx(1.45).epsilon(1e-9));
        CHECK(u(2.0) == doctest::Approx(1.55).epsilon(1e-9));
        double obj = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            obj += (u(z[i]) - y[i]) * (u(z[i]) - y[i]);
        CHECK(obj == doctest::Approx(0.605).epsilon(1e-9));
    }
    SUBCASE("all projections at zero force the zero function") {
        const std::vector<double> z{0.0, 0.0, 0.0}, y{1.0, -2.0, 5.0};
        const auto u = fit_activation(z, y, 0.5, 2.0, 1e-9);
        CHECK(u(0.0) == 0.0);
        CHECK(u(1.0) == doctest::Approx(0.5).epsilon(1e-12));  // minimal slope a
        CHECK(u(-1.0) == 0.0);                                 // flat left of anchor
    }
}

TEST_CASE("fit_activation input validation") {
    const std::vector<double> z{0.0, 1.0}, y{0.0, 1.0};
    CHECK_THROWS_AS(fit_activation(z, std::vector<double>{1.0}, 0.5, 1.0, 1e-9),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_activation(z, y, 0.5, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_activation(z, y, 2.0, 1.0, 1e-9), std::invalid_argument);
    const std::vector<double> bad{0.0, std::nan("")};
    CHECK_THROWS_AS(fit_activation(bad, y, 0.5, 1.0, 1e-9), std::invalid_argument);
}

TEST_CASE("membership is exact on random fits") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 60;
        std::vector<double> z(m), y(m);
        for (std::size_t i = 0; i < m; ++i) {
            z[i] = (rng.next_u64() % 8 == 0) ? 0.0 : 3.0 * rng.normal();
            y[i] = 3.0 * rng.normal();
        }
        if (trial % 3 == 0 && m >= 2) z[1] = z[0];  // force ties
        const double a = rng.uniform() * 0.999 + 0.001;
        const double b = 1.0 + 9.0 * rng.uniform();
        const auto u = fit_activation(z, y, a, b, 1e-9);
        CHECK(PiecewiseLinearActivation::slopes_admissible(u.knots(), u.values(), a, b));
    }
}

TEST_CASE("fitted objective beats feasible perturbations") {
    Rng rng(13);
    const std::size_t m = 40;
    std::vector<double> z(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        z[i] = 2.0 * rng.normal();
        y[i] = z[i] + 0.5 * rng.normal();
    }
    const double a = 0.25, b = 2.0;
    const auto u = fit_activation(z, y, a, b, 1e-9);
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) best += (u(z[i]) - y[i]) * (u(z[i]) - y[i]);

    for (int pert = 0; pert < 10; ++pert) {
        // Random feasible competitor on the same knots: start at the fit,
        // walk outward from the anchor with clamped perturbed increments.
        // Compared through the knot values directly (every data point is a
        // knot), so accumulation rounding cannot trip the class validator.
        const auto& knots = u.knots();
        const auto& vals = u.values();
        const std::size_t k = u.anchor_index();
        std::vector<double> alt(vals.size());
        alt[k] = 0.0;
        for (std::size_t s = k + 1; s < alt.size(); ++s) {
            const double dz = knots[s] - knots[s - 1];
            const double lo = knots[s - 1] >= 0.0 ? a * dz : 0.0;
            double inc = (vals[s] - vals[s - 1]) + 0.3 * rng.normal() * dz;
            inc = std::clamp(inc, lo, b * dz);
            alt[s] = alt[s - 1] + inc;
        }
        for (std::size_t s = k; s-- > 0;) {
            const double dz = knots[s + 1] - knots[s];
            const double lo = knots[s] >= 0.0 ? a * dz : 0.0;
            double inc = (vals[s + 1] - vals[s]) + 0.3 * rng.normal() * dz;
            inc = std::clamp(inc, lo, b * dz);
            alt[s] = alt[s + 1] - inc;
        }
        double obj = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto it = std::lower_bound(knots.begin(), knots.end(), z[i]);
            REQUIRE(it != knots.end());
            REQUIRE(*it == z[i]);
            const double v = alt[static_cast<std::size_t>(it - knots.begin())];
            obj += (v - y[i]) * (v - y[i]);
        }
        CHECK(obj >= best - 1e-9);
    }
}

TEST_CASE("permutation invariance of the fitted function") {
    Rng rng(19);
    const std::size_t m = 30;
    std::vector<double> z(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        z[i] = rng.normal();
        y[i] = rng.normal();
    }
    const auto u = fit_activation(z, y, 0.3, 3.0, 1e-9);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = m; i-- > 1;) std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);
    std::vector<double> zp(m), yp(m);
    for (std::size_t i = 0; i < m; ++i) {
        zp[i] = z[perm[i]];
        yp[i] = y[perm[i]];
    }
    const auto up = fit_activation(zp, yp, 0.3, 3.0, 1e-9);
    for (double t = -3.0; t <= 3.0; t += 0.1)
        CHECK(u(t) == doctest::Approx(up(t)).epsilon(1e-12));
}

TEST_CASE("idempotence: refitting the fitted values changes nothing") {
    Rng rng(23);
    const std::size_t m = 50;
    std::vector<double> z(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        z[i] = 2.0 * rng.normal();
        y[i] = rng.normal();
    }
    const auto u = fit_activation(z, y, 0.2, 2.5, 1e-9);
    std::vector<double> fit1(m);
    for (std::size_t i = 0; i < m; ++i) fit1[i] = u(z[i]);
    const auto u2 = fit_activation(z, fit1, 0.2, 2.5, 1e-9);
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        obj += (u2(z[i]) - fit1[i]) * (u2(z[i]) - fit1[i]);
    CHECK(obj <= 1e-16);
}

TEST_CASE("fitted-values overload matches evaluation bitwise") {
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 200;
        std::vector<double> z(m), y(m), fitted(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto mode = rng.next_u64() % 5;
            if (mode == 0)
                z[i] = 0.0;
            else if (mode == 1)
                z[i] = -0.0;
            else if (mode == 2 && i > 0)
                z[i] = z[rng.next_u64() % i];
            else
                z[i] = rng.normal();
            y[i] = rng.normal();
        }
        const auto u6 = fit_activation(z, y, 0.25, 2.0, 1e-9, fitted);
        const auto u5 = fit_activation(z, y, 0.25, 2.0, 1e-9);
        for (std::size_t i = 0; i < m; ++i) {
            const double e6 = u6(z[i]);
            const double e5 = u5(z[i]);
            CHECK(std::memcmp(&e6, &fitted[i], sizeof(double)) == 0);
            CHECK(std::memcmp(&e5, &fitted[i], sizeof(double)) == 0);
        }
    }
}

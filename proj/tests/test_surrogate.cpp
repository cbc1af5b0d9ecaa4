#include <doctest.h>

#include <cmath>
#include <vector>

#include "sim/monotone_fit.hpp"
#include "sim/rng.hpp"
#include "sim/surrogate.hpp"
#include "sim/synth.hpp"
#include "sim/types.hpp"

using namespace sim;

namespace {

Dataset gaussian_data(std::size_t d, std::size_t m, const std::vector<double>& w,
                      const PiecewiseLinearActivation& u, Rng& rng,
                      double noise_sd = 0.0) {
    std::vector<double> xs(d * m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            xs[i * d + j] = rng.normal();
            z += w[j] * xs[i * d + j];
        }
        ys[i] = u(z) + (noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0);
    }
    return Dataset(d, std::move(xs), std::move(ys));
}

Dataset one_sample(std::vector<double> x, double y) {
    const std::size_t d = x.size();
    return Dataset(d, std::move(x), {y});
}

}  // namespace

TEST_CASE("activation integral closed forms") {
    const PiecewiseLinearActivation id({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, 1.0, 1.0);
    CHECK(activation_integral(id, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(activation_integral(id, 0.0) == 0.0);
    CHECK(activation_integral(id, -1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(activation_integral(id, 2.0) == doctest::Approx(2.0).epsilon(1e-15));

    const PiecewiseLinearActivation relu({-1.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, 0.0, 1.0);
    CHECK(activation_integral(relu, -1.0) == 0.0);
    CHECK(activation_integral(relu, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(activation_integral(relu, 3.0) == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("surrogate loss pinned values") {
    const PiecewiseLinearActivation id({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, 1.0, 1.0);
    SUBCASE("w = 0 gives zero loss") {
        Rng rng(3);
        std::vector<double> w{0.0, 0.0};
        const auto data = gaussian_data(2, 64, {1.0, 0.0}, id, rng);
        CHECK(surrogate_loss(w, id, data) == 0.0);
    }
    SUBCASE("single sample integral term") {
        const auto data = one_sample({1.0}, 0.0);
        CHECK(surrogate_loss(std::vector<double>{2.0}, id, data) ==
              doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("label term cancels") {
        const auto data = one_sample({1.0}, 1.0);
        CHECK(surrogate_loss(std::vector<double>{2.0}, id, data) ==
              doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("surrogate gradient pinned values") {
    const PiecewiseLinearActivation id({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, 1.0, 1.0);
    SUBCASE("residual times x") {
        const auto data = one_sample({1.0, 0.0}, 0.0);
        const auto rep = surrogate_gradient(std::vector<double>{1.0, 0.0}, id, data);
        CHECK(rep.gradient[0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(rep.gradient[1] == 0.0);
        CHECK(rep.loss == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(rep.norm_sq == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("realizable data gives the zero gradient") {
        Rng rng(5);
        const std::vector<double> w{0.7, -0.3, 0.1};
        const auto data = gaussian_data(3, 128, w, id, rng);
        const auto rep = surrogate_gradient(w, id, data);
        for (double g : rep.gradient) CHECK(std::abs(g) <= 1e-12);
        CHECK(rep.loss <= 1e-24);
    }
    SUBCASE("norm_sq matches the gradient") {
        Rng rng(9);
        const std::vector<double> w{0.4, 0.2};
        const auto data = gaussian_data(2, 200, {1.0, -1.0}, id, rng, 0.5);
        const auto rep = surrogate_gradient(w, id, data);
        CHECK(rep.norm_sq ==
              doctest::Approx(norm_sq(rep.gradient)).epsilon(1e-12));
    }
}

TEST_CASE("gradient report loss is the empirical squared loss") {
    Rng rng(17);
    const PiecewiseLinearActivation u =
        fit_activation(std::vector<double>{-1.0, 0.0, 2.0},
                       std::vector<double>{-0.7, 0.0, 1.1}, 0.25, 2.0, 1e-9);
    const std::vector<double> w{0.8, -0.5};
    const auto data = gaussian_data(2, 256, {1.0, 0.0}, u, rng, 0.3);
    const auto rep = surrogate_gradient(w, u, data);
    CHECK(rep.loss == doctest::Approx(l2_loss({w, u}, data)).epsilon(1e-12));
}

TEST_CASE("gradient-from-values agrees with the direct gradient") {
    Rng rng(21);
    const PiecewiseLinearActivation u({-1.5, 0.0, 1.0, 2.0},
                                      {-0.9, 0.0, 0.8, 1.5}, 0.3, 1.5);
    const std::vector<double> w{0.6, 0.3, -0.2};
    const auto data = gaussian_data(3, 300, {1.0, 0.0, 0.0}, u, rng, 0.2);
    std::vector<double> vals(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) vals[i] = u(dot(w, data.x(i)));
    const auto a = surrogate_gradient(w, u, data);
    const auto b = surrogate_gradient_from_values(vals, data);
    for (std::size_t j = 0; j < w.size(); ++j)
        CHECK(a.gradient[j] == doctest::Approx(b.gradient[j]).epsilon(1e-12));
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
}

TEST_CASE("finite differences match the gradient away from kinks") {
    Rng rng(33);
    int done = 0;
    while (done < 20) {
        const std::size_t d = 2 + rng.next_u64() % 3;
        const std::size_t m = 64;
        std::vector<double> zfit(40), yfit(40);
        for (auto& v : zfit) v = 2.0 * rng.normal();
        for (auto& v : yfit) v = rng.normal();
        const auto u = fit_activation(zfit, yfit, 0.2, 2.0, 1e-9);

        std::vector<double> w(d);
        for (auto& v : w) v = rng.normal();
        Rng data_rng(1000 + done);
        const auto data =
            gaussian_data(d, m, std::vector<double>(d, 0.5), u, data_rng, 0.4);

        // Keep all projections clear of activation kinks.
        double min_dist = 1e9;
        for (std::size_t i = 0; i < m; ++i) {
            const double z = dot(w, data.x(i));
            for (double kn : u.knots()) min_dist = std::min(min_dist, std::abs(z - kn));
        }
        if (min_dist <= 1e-4) continue;
        ++done;

        const auto rep = surrogate_gradient(w, u, data);
        const double tol = std::max(1e-5, 1e-3 * std::sqrt(rep.norm_sq));
        const double h = 1e-6;
        for (std::size_t j = 0; j < d; ++j) {
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            const double fd =
                (surrogate_loss(wp, u, data) - surrogate_loss(wm, u, data)) / (2 * h);
            CHECK(std::abs(fd - rep.gradient[j]) <= tol);
        }
    }
}

TEST_CASE("surrogate loss is convex along segments") {
    Rng rng(55);
    const auto u = fit_activation(std::vector<double>{-2.0, -0.5, 0.0, 1.0, 2.5},
                                  std::vector<double>{-1.0, -0.4, 0.0, 0.9, 2.0},
                                  0.1, 2.0, 1e-9);
    const auto data = gaussian_data(3, 100, {0.5, -0.5, 1.0}, u, rng, 0.5);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> w1(3), w2(3);
        for (auto& v : w1) v = rng.normal();
        for (auto& v : w2) v = rng.normal();
        const double lam = rng.uniform_open();
        std::vector<double> mid(3);
        for (std::size_t j = 0; j < 3; ++j) mid[j] = lam * w1[j] + (1 - lam) * w2[j];
        CHECK(surrogate_loss(mid, u, data) <=
              lam * surrogate_loss(w1, u, data) +
                  (1 - lam) * surrogate_loss(w2, u, data) + 1e-10);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const PiecewiseLinearActivation id({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, 1.0, 1.0);
    const auto data = one_sample({1.0, 2.0}, 0.0);
    CHECK_THROWS_AS(surrogate_loss(std::vector<double>{1.0}, id, data),
                    std::invalid_argument);
    CHECK_THROWS_AS(surrogate_gradient(std::vector<double>{1.0, 0.0, 0.0}, id, data),
                    std::invalid_argument);
}

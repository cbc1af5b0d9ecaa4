#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sim/common.hpp"

namespace sim {

struct Sample {
    std::vector<double> x;
    double y = 0.0;
};

/// m labeled examples with contiguous row-major feature storage.
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::size_t d, std::vector<double> xs, std::vector<double> ys);

    /// Reshape in place; keeps capacity so refilling a buffer is free.
    void resize(std::size_t d, std::size_t m) {
        d_ = d;
        xs_.resize(d * m);
        ys_.resize(m);
    }

    std::size_t dim() const { return d_; }
    std::size_t size() const { return ys_.size(); }
    std::span<const double> x(std::size_t i) const {
        return {xs_.data() + i * d_, d_};
    }
    double y(std::size_t i) const { return ys_[i]; }
    Sample sample(std::size_t i) const {
        return {std::vector<double>(x(i).begin(), x(i).end()), ys_[i]};
    }
    std::span<const double> features() const { return xs_; }
    std::span<const double> labels() const { return ys_; }
    std::span<double> mutable_features() { return xs_; }
    std::span<double> mutable_labels() { return ys_; }

  private:
    std::size_t d_ = 0;
    std::vector<double> xs_;
    std::vector<double> ys_;
};

/// Non-decreasing b-Lipschitz piecewise-linear function through (0,0) whose
/// slope is at least `a` on [0, inf). Knots are sorted and distinct (equal
/// input knots must carry equal values and are collapsed); evaluation is
/// linear interpolation, extrapolation reuses the end-segment slope. When the
/// anchor is the last (first) knot, the right (left) extrapolation slope is
/// `a` (zero), the minimal admissible choice.
class PiecewiseLinearActivation {
  public:
    /// The zero function (anchor knot only, both slope bounds zero).
    PiecewiseLinearActivation() : knots_{0.0}, values_{0.0}, knot_integrals_{0.0} {}

    PiecewiseLinearActivation(std::vector<double> knots, std::vector<double> values,
                              double a, double b);

    double operator()(double z) const;

    /// Exact integral of the function over [0, t] (signed for t < 0).
    double integral(double t) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t anchor_index() const { return anchor_; }
    double lower_slope() const { return a_; }
    double lipschitz() const { return b_; }

    double right_slope() const { return right_slope_; }
    double left_slope() const { return left_slope_; }

    /// Exact slope predicate: every segment slope lies in [0, b] and is at
    /// least `a` on the nonnegative axis, with zero tolerance.
    static bool slopes_admissible(const std::vector<double>& knots,
                                  const std::vector<double>& values, double a,
                                  double b);

  private:
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> knot_integrals_;
    std::size_t anchor_ = 0;
    double a_ = 0.0;
    double b_ = 0.0;
    double left_slope_ = 0.0;
    double right_slope_ = 0.0;
};

struct Hypothesis {
    std::vector<double> w;
    PiecewiseLinearActivation activation;

    double predict(std::span<const double> x) const {
        return activation(dot(w, x));
    }
};

/// All hyperparameters of the pipeline. A negative value means "derive the
/// default" for mu, eta_init and eta_opt (zero is a legal explicit step size).
struct LearnerConfig {
    double a = 0.5;
    double b = 1.0;
    double L = 0.05;
    double R = 1.0;
    double W = 2.0;
    double eps = 1e-2;
    double delta = 1.0 / 3.0;
    double mu = -1.0;
    double eta_init = -1.0;
    double eta_opt = -1.0;
    std::size_t t0_cap = 200;
    std::size_t T_cap = 500;
    std::size_t J_cap = 64;
    std::size_t m_batch = 1024;
    std::size_t m_test = 4096;
    std::size_t m_init = 512;
    std::uint64_t seed = 1;
    double kkt_tol = 1e-7;
    double fd_tol = 1e-5;

    /// Fills derived defaults and validates ranges; throws config_error.
    void finalize();
};

double eval_activation(const PiecewiseLinearActivation& u, double z);

double l2_loss(const Hypothesis& h, const Dataset& data);

/// Norm of the component of wstar orthogonal to w; ||wstar|| when w = 0.
double misalignment(std::span<const double> wstar, std::span<const double> w);

/// Angle in [0, pi]; throws std::invalid_argument on zero input.
double angle(std::span<const double> w1, std::span<const double> w2);

}  // namespace sim

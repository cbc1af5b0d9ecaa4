#pragma once

#include <span>
#include <vector>

#include "sim/types.hpp"

namespace sim {

struct GradientReport {
    std::vector<double> gradient;
    double norm_sq = 0.0;
    double loss = 0.0;  // empirical squared loss at (w, u), not the surrogate
};

/// Exact integral of u over [0, t].
double activation_integral(const PiecewiseLinearActivation& u, double t);

/// (1/m) sum_i [ integral_0^{w.x_i} u - y_i * (w.x_i) ]; convex in w.
double surrogate_loss(std::span<const double> w, const PiecewiseLinearActivation& u,
                      const Dataset& data);

/// gradient = (1/m) sum_i (u(w.x_i) - y_i) x_i. Kinks evaluate through the
/// single-valued piecewise-linear evaluation, so the formula is total.
GradientReport surrogate_gradient(std::span<const double> w,
                                  const PiecewiseLinearActivation& u,
                                  const Dataset& data);

/// Same gradient when the projections w.x_i and activation values u(w.x_i)
/// are already known (the learner reuses the fit batch where the fitted
/// values are exactly these evaluations).
GradientReport surrogate_gradient_from_values(std::span<const double> activated,
                                              const Dataset& data);

}  // namespace sim

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim/types.hpp"

namespace sim {

enum class MarginalKind {
    gaussian_isotropic,
    laplace_product,
    logistic_product,
    uniform_ball,
};

/// Documented anti-concentration constants: the two-dimensional projected
/// density is >= L on the box |z|_inf <= R and <= (1/L) exp(-L r) at radius r.
struct WellBehaved {
    double L;
    double R;
};

/// gaussian_isotropic: standard bivariate normal on every 2-plane; density at
/// the box corner (1,1) is exp(-1)/(2 pi) ~ 0.0585 >= 0.05.
/// laplace_product (scale 1/sqrt2) and logistic_product (scale sqrt3/pi): the
/// least favorable plane is axis-aligned; corner density at (0.7, 0.7) is
/// 0.5 exp(-1.4 sqrt2) ~ 0.069 resp. 0.315^2 ~ 0.099, both >= 0.05.
/// uniform_ball (radius sqrt(d+2)): rotation-invariant; projected density
/// d/(2 pi (d+2)) * (1 - r^2/(d+2))^{(d-2)/2} >= 0.079 * 0.8 on |z| <= 1 for
/// every d >= 2. All four have peak 2-D density <= 0.5 <= 1/L with
/// sub-exponential (here compactly dominated) tails at rate L.
WellBehaved well_behaved_constants(MarginalKind kind);

struct MarginalSpec {
    MarginalKind kind = MarginalKind::gaussian_isotropic;
    std::size_t d = 1;
};

struct TargetModel {
    std::vector<double> wstar;
    PiecewiseLinearActivation ustar;
};

enum class NoiseKind { none, sign_flip, zero_out, additive_outlier, label_shift };

struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double p = 0.0;
    double magnitude = 0.0;
    double delta = 0.0;
};

struct ScenarioSpec {
    MarginalSpec marginal;
    TargetModel target;
    NoiseModel noise;
    std::uint64_t seed = 1;
};

struct OptEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// m i.i.d. draws; bit-reproducible given (spec.seed, stream_id).
Dataset sample_batch(const ScenarioSpec& spec, std::size_t m, std::uint64_t stream_id);

/// Same draw into a caller-owned buffer (the learner's hot path).
void sample_batch_into(const ScenarioSpec& spec, std::size_t m,
                       std::uint64_t stream_id, Dataset& out);

/// Monte-Carlo loss of the planted pair (wstar, ustar) with standard error.
/// An upper bound on OPT: the population minimizer may do better.
OptEstimate estimate_opt(const ScenarioSpec& spec, std::size_t n_mc,
                         std::uint64_t stream_id = 0x09f0);

// Named activation forms.
PiecewiseLinearActivation make_linear_activation(double c);
PiecewiseLinearActivation make_relu_activation();
PiecewiseLinearActivation make_leaky_relu_activation(double alpha);
PiecewiseLinearActivation make_saturating_ramp_activation(double slope_low,
                                                          double slope_high,
                                                          double z0);
PiecewiseLinearActivation make_zero_activation();
PiecewiseLinearActivation make_clipped_ramp_activation(double c);

void validate_scenario(const ScenarioSpec& spec);

}  // namespace sim

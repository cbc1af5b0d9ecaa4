#include "sim/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "sim/rng.hpp"

namespace sim {
namespace {

constexpr double kLaplaceScale = 0.70710678118654752440;  // 1/sqrt(2): unit variance
constexpr double kLogisticScale = 0.55132889542179204148;  // sqrt(3)/pi: unit variance

void fill_marginal(MarginalKind kind, std::size_t d, Rng& rng, std::span<double> x) {
    switch (kind) {
        case MarginalKind::gaussian_isotropic:
            for (auto& v : x) v = rng.normal();
            break;
        case MarginalKind::laplace_product:
            for (auto& v : x) v = kLaplaceScale * rng.laplace();
            break;
        case MarginalKind::logistic_product:
            for (auto& v : x) v = kLogisticScale * rng.logistic();
            break;
        case MarginalKind::uniform_ball: {
            // Radius sqrt(d+2) makes E[x x^T] exactly the identity.
            double nsq = 0.0;
            for (auto& v : x) {
                v = rng.normal();
                nsq += v * v;
            }
            const double r = std::sqrt(static_cast<double>(d) + 2.0) *
                             std::pow(rng.uniform_open(),
                                      1.0 / static_cast<double>(d)) /
                             std::sqrt(nsq);
            for (auto& v : x) v *= r;
            break;
        }
    }
}

double corrupt(const NoiseModel& noise, double y, Rng& rng) {
    switch (noise.kind) {
        case NoiseKind::none:
            return y;
        case NoiseKind::sign_flip:
            return rng.uniform() < noise.p ? -y : y;
        case NoiseKind::zero_out:
            return rng.uniform() < noise.p ? 0.0 : y;
        case NoiseKind::additive_outlier:
            if (rng.uniform() < noise.p)
                return y + (rng.uniform() < 0.5 ? noise.magnitude : -noise.magnitude);
            return y;
        case NoiseKind::label_shift:
            return rng.uniform() < noise.p ? y + noise.delta : y;
    }
    return y;
}

}  // namespace

WellBehaved well_behaved_constants(MarginalKind kind) {
    switch (kind) {
        case MarginalKind::gaussian_isotropic:
            return {0.05, 1.0};
        case MarginalKind::laplace_product:
        case MarginalKind::logistic_product:
        case MarginalKind::uniform_ball:
            return {0.05, 0.7};
    }
    return {0.05, 0.7};
}

void validate_scenario(const ScenarioSpec& spec) {
    if (spec.marginal.d < 1) throw config_error("scenario: d must be >= 1");
    if (spec.target.wstar.size() != spec.marginal.d)
        throw config_error("scenario: wstar dimension mismatch");
    if (!all_finite(spec.target.wstar))
        throw config_error("scenario: non-finite wstar");
    if (spec.noise.p < 0.0 || spec.noise.p > 1.0)
        throw config_error("scenario: noise probability outside [0, 1]");
    if (!std::isfinite(spec.noise.magnitude) || !std::isfinite(spec.noise.delta))
        throw config_error("scenario: non-finite noise parameter");
}

Dataset sample_batch(const ScenarioSpec& spec, std::size_t m, std::uint64_t stream_id) {
    Dataset out;
    sample_batch_into(spec, m, stream_id, out);
    return out;
}

void sample_batch_into(const ScenarioSpec& spec, std::size_t m,
                       std::uint64_t stream_id, Dataset& out) {
    if (m < 1) throw std::invalid_argument("sample_batch: m must be >= 1");
    validate_scenario(spec);
    const std::size_t d = spec.marginal.d;
    Rng rng = Rng::stream(spec.seed, 0x5A3B, stream_id, 0, 0);
    out.resize(d, m);
    double* xs = out.mutable_features().data();
    double* ys = out.mutable_labels().data();
    for (std::size_t i = 0; i < m; ++i) {
        std::span<double> xi{xs + i * d, d};
        fill_marginal(spec.marginal.kind, d, rng, xi);
        const double clean = spec.target.ustar(dot(spec.target.wstar, xi));
        ys[i] = corrupt(spec.noise, clean, rng);
    }
}

OptEstimate estimate_opt(const ScenarioSpec& spec, std::size_t n_mc,
                         std::uint64_t stream_id) {
    if (n_mc < 1) throw std::invalid_argument("estimate_opt: n_mc must be >= 1");
    const Dataset batch = sample_batch(spec, n_mc, stream_id);
    std::vector<double> sq(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double r =
            spec.target.ustar(dot(spec.target.wstar, batch.x(i))) - batch.y(i);
        sq[i] = r * r;
    }
    const double mean = pairwise_sum(sq) / static_cast<double>(n_mc);
    double var = 0.0;
    for (double v : sq) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n_mc) * std::max<double>(1, n_mc - 1);
    return {mean, std::sqrt(var), n_mc};
}

PiecewiseLinearActivation make_linear_activation(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("linear activation: slope must be > 0");
    return {{-1.0, 0.0, 1.0}, {-c, 0.0, c}, c, c};
}

PiecewiseLinearActivation make_relu_activation() {
    return {{-1.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, 1.0, 1.0};
}

PiecewiseLinearActivation make_leaky_relu_activation(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("leaky_relu: alpha must lie in [0, 1]");
    return {{-1.0, 0.0, 1.0}, {-alpha, 0.0, 1.0}, 1.0, 1.0};
}

PiecewiseLinearActivation make_saturating_ramp_activation(double slope_low,
                                                          double slope_high,
                                                          double z0) {
    if (!(slope_low >= 0.0 && slope_low <= slope_high) || !(z0 > 0.0))
        throw std::invalid_argument("saturating_ramp: bad parameters");
    return {{-1.0, 0.0, z0, z0 + 1.0},
            {-slope_low, 0.0, slope_high * z0, slope_high * z0 + slope_low},
            slope_low,
            slope_high};
}

PiecewiseLinearActivation make_zero_activation() { return {{0.0}, {0.0}, 0.0, 0.0}; }

PiecewiseLinearActivation make_clipped_ramp_activation(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("clipped_ramp: c must be > 0");
    return {{-2.0 * c, -c, 0.0, c, 2.0 * c}, {-c, -c, 0.0, c, c}, 0.0, 1.0};
}

}  // namespace sim

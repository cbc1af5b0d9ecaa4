#include "sim/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sim {

Dataset::Dataset(std::size_t d, std::vector<double> xs, std::vector<double> ys)
    : d_(d), xs_(std::move(xs)), ys_(std::move(ys)) {
    if (d_ == 0) throw std::invalid_argument("Dataset: d must be >= 1");
    if (ys_.empty()) throw std::invalid_argument("Dataset: m must be >= 1");
    if (xs_.size() != ys_.size() * d_)
        throw std::invalid_argument("Dataset: feature buffer size mismatch");
    if (!all_finite(xs_) || !all_finite(ys_))
        throw std::invalid_argument("Dataset: non-finite entry");
}

bool PiecewiseLinearActivation::slopes_admissible(const std::vector<double>& knots,
                                                  const std::vector<double>& values,
                                                  double a, double b) {
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double dz = knots[i + 1] - knots[i];
        const double dv = values[i + 1] - values[i];
        if (dv < 0.0 || dv > b * dz) return false;
        if (knots[i] >= 0.0 && dv < a * dz) return false;
    }
    return true;
}

PiecewiseLinearActivation::PiecewiseLinearActivation(std::vector<double> knots,
                                                     std::vector<double> values,
                                                     double a, double b)
    : a_(a), b_(b) {
    if (knots.size() != values.size() || knots.empty())
        throw std::invalid_argument("activation: knot/value size mismatch");
    if (!all_finite(knots) || !all_finite(values) || !std::isfinite(a) ||
        !std::isfinite(b) || a < 0.0 || b < 0.0 || a > b)
        throw std::invalid_argument("activation: bad parameters");
    if (!std::is_sorted(knots.begin(), knots.end()))
        throw std::invalid_argument("activation: knots not sorted");

    knots_.reserve(knots.size());
    values_.reserve(values.size());
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!knots_.empty() && knots[i] == knots_.back()) {
            if (values[i] != values_.back())
                throw std::invalid_argument("activation: equal knots, unequal values");
            continue;
        }
        knots_.push_back(knots[i]);
        values_.push_back(values[i]);
    }

    auto it = std::lower_bound(knots_.begin(), knots_.end(), 0.0);
    if (it == knots_.end() || *it != 0.0)
        throw std::invalid_argument("activation: missing anchor knot at 0");
    anchor_ = static_cast<std::size_t>(it - knots_.begin());
    if (values_[anchor_] != 0.0)
        throw std::invalid_argument("activation: anchor value must be 0");
    if (!slopes_admissible(knots_, values_, a_, b_))
        throw std::invalid_argument("activation: slope constraints violated");

    const std::size_t n = knots_.size();
    left_slope_ = anchor_ == 0 ? 0.0
                               : (values_[1] - values_[0]) / (knots_[1] - knots_[0]);
    right_slope_ = anchor_ == n - 1
                       ? a_
                       : (values_[n - 1] - values_[n - 2]) /
                             (knots_[n - 1] - knots_[n - 2]);

    // Trapezoid sums are exact for linear segments.
    knot_integrals_.assign(n, 0.0);
    for (std::size_t i = anchor_; i + 1 < n; ++i)
        knot_integrals_[i + 1] = knot_integrals_[i] +
                                 0.5 * (values_[i] + values_[i + 1]) *
                                     (knots_[i + 1] - knots_[i]);
    for (std::size_t i = anchor_; i > 0; --i)
        knot_integrals_[i - 1] = knot_integrals_[i] -
                                 0.5 * (values_[i - 1] + values_[i]) *
                                     (knots_[i] - knots_[i - 1]);
}

double PiecewiseLinearActivation::operator()(double z) const {
    if (z <= knots_.front())
        return values_.front() + left_slope_ * (z - knots_.front());
    if (z >= knots_.back())
        return values_.back() + right_slope_ * (z - knots_.back());
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
    const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double t = (z - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return values_[i] + t * (values_[i + 1] - values_[i]);
}

double PiecewiseLinearActivation::integral(double t) const {
    double base, v0, slope, dz;
    if (t <= knots_.front()) {
        base = knot_integrals_.front();
        v0 = values_.front();
        slope = left_slope_;
        dz = t - knots_.front();
    } else if (t >= knots_.back()) {
        base = knot_integrals_.back();
        v0 = values_.back();
        slope = right_slope_;
        dz = t - knots_.back();
    } else {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
        base = knot_integrals_[i];
        v0 = values_[i];
        slope = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
        dz = t - knots_[i];
    }
    return base + v0 * dz + 0.5 * slope * dz * dz;
}

double eval_activation(const PiecewiseLinearActivation& u, double z) { return u(z); }

double l2_loss(const Hypothesis& h, const Dataset& data) {
    if (h.w.size() != data.dim())
        throw std::invalid_argument("l2_loss: dimension mismatch");
    const std::size_t m = data.size();
    std::vector<double> sq(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double r = h.activation(dot(h.w, data.x(i))) - data.y(i);
        sq[i] = r * r;
    }
    return pairwise_sum(sq) / static_cast<double>(m);
}

double misalignment(std::span<const double> wstar, std::span<const double> w) {
    if (wstar.size() != w.size())
        throw std::invalid_argument("misalignment: dimension mismatch");
    const double wsq = norm_sq(w);
    if (wsq == 0.0) return norm2(wstar);
    const double c = dot(wstar, w) / wsq;
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = wstar[i] - c * w[i];
        s += r * r;
    }
    return std::sqrt(s);
}

double angle(std::span<const double> w1, std::span<const double> w2) {
    const double n1 = norm2(w1);
    const double n2 = norm2(w2);
    if (n1 == 0.0 || n2 == 0.0)
        throw std::invalid_argument("angle: zero vector");
    const double c = std::clamp(dot(w1, w2) / (n1 * n2), -1.0, 1.0);
    return std::acos(c);
}

void LearnerConfig::finalize() {
    auto fail = [](const std::string& what) { throw config_error("config: " + what); };
    if (!(a > 0.0 && a <= 1.0 && b >= 1.0 && a <= b)) fail("need 0 < a <= 1 <= b");
    if (!(L > 0.0 && L <= 1.0 && R > 0.0 && R <= 1.0)) fail("need L, R in (0, 1]");
    if (!(W > 0.0)) fail("need W > 0");
    if (!(eps > 0.0 && eps < 1.0)) fail("need eps in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) fail("need delta in (0, 1)");
    if (mu < 0.0) mu = std::min(1.0, a * a * L * R * R * R * R / b);
    if (!(mu > 0.0 && mu <= 1.0)) fail("need mu in (0, 1]");
    if (eta_init < 0.0) eta_init = mu * mu * mu / (128.0 * b * b * b * b);
    if (eta_opt < 0.0) eta_opt = mu / (4.0 * b * b);
    if (J_cap < 1) fail("need J_cap >= 1");
    if (m_batch < 1 || m_test < 1 || m_init < 1) fail("batch sizes must be >= 1");
    if (!(kkt_tol > 0.0) || !(fd_tol > 0.0)) fail("tolerances must be positive");
}

}  // namespace sim

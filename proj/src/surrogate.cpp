#include "sim/surrogate.hpp"

#include <stdexcept>

namespace sim {

double activation_integral(const PiecewiseLinearActivation& u, double t) {
    return u.integral(t);
}

double surrogate_loss(std::span<const double> w, const PiecewiseLinearActivation& u,
                      const Dataset& data) {
    if (w.size() != data.dim())
        throw std::invalid_argument("surrogate_loss: dimension mismatch");
    const std::size_t m = data.size();
    std::vector<double> terms(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double z = dot(w, data.x(i));
        terms[i] = u.integral(z) - data.y(i) * z;
    }
    return pairwise_sum(terms) / static_cast<double>(m);
}

GradientReport surrogate_gradient_from_values(std::span<const double> activated,
                                              const Dataset& data) {
    const std::size_t m = data.size();
    const std::size_t d = data.dim();
    if (activated.size() != m)
        throw std::invalid_argument("surrogate_gradient: value count mismatch");
    GradientReport rep;
    rep.gradient.assign(d, 0.0);
    double* g = rep.gradient.data();
    const double* xs = data.features().data();
    const double* ys = data.labels().data();
    CompensatedSum loss_acc;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = activated[i] - ys[i];
        const double* xi = xs + i * d;
        for (std::size_t j = 0; j < d; ++j) g[j] += r * xi[j];
        loss_acc.add(r * r);
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < d; ++j) g[j] *= inv_m;
    rep.norm_sq = norm_sq(rep.gradient);
    rep.loss = loss_acc.value() * inv_m;
    return rep;
}

GradientReport surrogate_gradient(std::span<const double> w,
                                  const PiecewiseLinearActivation& u,
                                  const Dataset& data) {
    if (w.size() != data.dim())
        throw std::invalid_argument("surrogate_gradient: dimension mismatch");
    const std::size_t m = data.size();
    std::vector<double> activated(m);
    for (std::size_t i = 0; i < m; ++i) activated[i] = u(dot(w, data.x(i)));
    return surrogate_gradient_from_values(activated, data);
}

}  // namespace sim

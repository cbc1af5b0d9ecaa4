#include "sim/monotone_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace sim {
namespace {

// Derivative of the running value function, kept as a monotone piecewise
// linear function split into a left wing, an explicit middle piece and a
// right wing. Wing pieces live in shifted coordinates so that the per-node
// translate/affine updates are O(1); only pieces the minimizer walks across
// are touched.
struct Piece {
    double lo, hi;
    double slope, icept;
};

struct Side {
    std::vector<Piece> st;  // back = piece nearest the middle
    double S = 0.0;         // accumulated translation
    double A = 0.0;         // accumulated affine slope
    double B = 0.0;         // accumulated affine intercept (in shifted coords)

    bool empty() const { return st.empty(); }

    void push_true(double tlo, double thi, double slope, double icept) {
        st.push_back({tlo - S, thi - S, slope - A, slope * S + icept - B});
    }

    Piece top_true() const {
        const Piece& p = st.back();
        const double slope = p.slope + A;
        return {p.lo + S, p.hi + S, slope, p.icept + B - slope * S};
    }

    void add_affine(double alpha, double beta) {
        A += alpha;
        B += alpha * S + beta;
    }

    void clear() {
        st.clear();
        S = A = B = 0.0;
    }
};

class HalfChainDP {
  public:
    // Nodes a = 0..h-1 hang off the anchor; window[a] bounds value[a]-value[a-1]
    // (value[-1] = 0). Weighted targets; all weights positive.
    void solve(std::span<const double> targets, std::span<const double> weights,
               std::span<const double> wlo, std::span<const double> whi,
               std::span<double> values) {
        const std::size_t h = targets.size();
        roots_.resize(h);
        auto& roots = roots_;
        left_.clear();
        right_.clear();
        mlo_ = wlo[0];
        mhi_ = whi[0];
        mslope_ = 2.0 * weights[0];
        micept_ = -2.0 * weights[0] * targets[0];
        for (std::size_t a = 0;; ++a) {
            roots[a] = find_root();
            if (a + 1 == h) break;
            left_.S += wlo[a + 1];
            right_.S += whi[a + 1];
            mlo_ = roots[a] + wlo[a + 1];
            mhi_ = roots[a] + whi[a + 1];
            mslope_ = 0.0;
            micept_ = 0.0;
            const double alpha = 2.0 * weights[a + 1];
            const double beta = -2.0 * weights[a + 1] * targets[a + 1];
            left_.add_affine(alpha, beta);
            right_.add_affine(alpha, beta);
            mslope_ += alpha;
            micept_ += beta;
        }
        values[h - 1] = roots[h - 1];
        for (std::size_t a = h - 1; a-- > 0;) {
            const double lo = values[a + 1] - whi[a + 1];
            const double hi = values[a + 1] - wlo[a + 1];
            values[a] = std::clamp(roots[a], lo, hi);
        }
    }

  private:
    // Locates the zero of the (strictly increasing) derivative, migrating
    // pieces so that everything left of the root sits on left_ and everything
    // right of it on right_; the middle piece is consumed.
    double find_root() {
        const double vlo = mslope_ * mlo_ + micept_;
        const double vhi = mslope_ * mhi_ + micept_;
        if (vlo > 0.0) {
            right_.push_true(mlo_, mhi_, mslope_, micept_);
            while (!left_.empty()) {
                const Piece p = left_.top_true();
                if (p.slope * p.lo + p.icept > 0.0) {
                    left_.st.pop_back();
                    right_.push_true(p.lo, p.hi, p.slope, p.icept);
                    continue;
                }
                const double r = split_point(p);
                left_.st.pop_back();
                if (r > p.lo) left_.push_true(p.lo, r, p.slope, p.icept);
                if (p.hi > r) right_.push_true(r, p.hi, p.slope, p.icept);
                return r;
            }
            return right_.top_true().lo;  // domain lower end
        }
        if (vhi < 0.0) {
            left_.push_true(mlo_, mhi_, mslope_, micept_);
            while (!right_.empty()) {
                const Piece p = right_.top_true();
                if (p.slope * p.hi + p.icept < 0.0) {
                    right_.st.pop_back();
                    left_.push_true(p.lo, p.hi, p.slope, p.icept);
                    continue;
                }
                const double r = split_point(p);
                right_.st.pop_back();
                if (p.hi > r) right_.push_true(r, p.hi, p.slope, p.icept);
                if (r > p.lo) left_.push_true(p.lo, r, p.slope, p.icept);
                return r;
            }
            return left_.top_true().hi;  // domain upper end
        }
        const double r = split_point({mlo_, mhi_, mslope_, micept_});
        if (r > mlo_) left_.push_true(mlo_, r, mslope_, micept_);
        if (mhi_ > r) right_.push_true(r, mhi_, mslope_, micept_);
        return r;
    }

    static double split_point(const Piece& p) {
        if (p.slope <= 0.0) return p.lo;
        return std::clamp(-p.icept / p.slope, p.lo, p.hi);
    }

    Side left_, right_;
    std::vector<double> roots_;
    double mlo_ = 0.0, mhi_ = 0.0, mslope_ = 0.0, micept_ = 0.0;
};

struct ChainData {
    std::span<const double> targets, weights, lowers, uppers;
    std::size_t anchor;
};

// Solves the anchored chain by splitting it at the anchor; the left part is
// reflected (v'_j = -v_{k-j}) so one forward pass covers both directions.
// Thread-local scratch keeps the hot path allocation-free.
void solve_anchored(const ChainData& c, std::span<double> values) {
    const std::size_t n = c.targets.size();
    const std::size_t k = c.anchor;
    thread_local HalfChainDP dp;
    thread_local std::vector<double> t, w, lo, hi, v;
    values[k] = 0.0;
    if (k + 1 < n) {
        // The right half is contiguous; solve it in place.
        dp.solve(c.targets.subspan(k + 1), c.weights.subspan(k + 1),
                 c.lowers.subspan(k), c.uppers.subspan(k),
                 values.subspan(k + 1));
    }
    if (k > 0) {
        const std::size_t h = k;
        t.resize(h);
        w.resize(h);
        lo.resize(h);
        hi.resize(h);
        v.resize(h);
        for (std::size_t a = 0; a < h; ++a) {
            t[a] = -c.targets[k - 1 - a];
            w[a] = c.weights[k - 1 - a];
            lo[a] = c.lowers[k - 1 - a];
            hi[a] = c.uppers[k - 1 - a];
        }
        dp.solve(t, w, lo, hi, v);
        for (std::size_t a = 0; a < h; ++a) values[k - 1 - a] = -v[a];
    }
}

double chain_objective(const ChainQP& p, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = v[i] - p.targets[i];
        s += r * r;
    }
    return s;
}

// Stationarity multipliers follow from a forward recursion; the reported
// residual is the worst primal violation or complementarity product.
double chain_kkt_residual(const ChainQP& p, const std::vector<double>& v) {
    const std::size_t n = v.size();
    double nu = 0.0;
    for (std::size_t i = 0; i < n; ++i) nu -= 2.0 * (v[i] - p.targets[i]);
    double worst = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        s += 2.0 * (v[i] - p.targets[i]) + (i == p.anchor ? nu : 0.0);
        const double dv = v[i + 1] - v[i];
        worst = std::max(worst, std::max(p.lowers[i] - dv, dv - p.uppers[i]));
        if (s > 0.0) worst = std::max(worst, s * std::max(0.0, p.uppers[i] - dv));
        if (s < 0.0) worst = std::max(worst, -s * std::max(0.0, dv - p.lowers[i]));
    }
    return worst;
}

void validate_chain(const ChainQP& p) {
    const std::size_t n = p.targets.size();
    if (n == 0) throw std::invalid_argument("chain_qp: empty");
    if (p.lowers.size() != n - 1 || p.uppers.size() != n - 1)
        throw std::invalid_argument("chain_qp: bound list sizes must be n-1");
    if (p.anchor >= n) throw std::invalid_argument("chain_qp: anchor out of range");
    if (!all_finite(p.targets) || !all_finite(p.lowers) || !all_finite(p.uppers))
        throw std::invalid_argument("chain_qp: non-finite input");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (p.lowers[i] > p.uppers[i])
            throw std::invalid_argument("chain_qp: infeasible (lower > upper)");
}

std::vector<double> chain_values_from_increments(const ChainQP& p,
                                                 const std::vector<double>& d) {
    const std::size_t n = p.targets.size();
    std::vector<double> v(n, 0.0);
    for (std::size_t a = p.anchor + 1; a < n; ++a) v[a] = v[a - 1] + d[a - 1];
    for (std::size_t a = p.anchor; a-- > 0;) v[a] = v[a + 1] - d[a];
    return v;
}

}  // namespace

FitResult solve_chain_qp(const ChainQP& problem, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("chain_qp: tol must be positive");
    validate_chain(problem);
    const std::size_t n = problem.targets.size();
    std::vector<double> weights(n, 1.0);
    FitResult out;
    out.values.resize(n);
    solve_anchored(
        {problem.targets, weights, problem.lowers, problem.uppers, problem.anchor},
        out.values);
    out.objective = chain_objective(problem, out.values);
    out.kkt_residual = chain_kkt_residual(problem, out.values);
    return out;
}

FitResult brute_fit_oracle(const ChainQP& problem, double grid_tol) {
    if (!(grid_tol > 0.0))
        throw std::invalid_argument("brute_fit_oracle: grid_tol must be positive");
    validate_chain(problem);
    const std::size_t n = problem.targets.size();
    if (n > 10) throw std::invalid_argument("brute_fit_oracle: instance too large");
    const std::size_t nd = n - 1;
    const std::size_t k = problem.anchor;

    auto objective_of = [&](const std::vector<double>& d) {
        return chain_objective(problem, chain_values_from_increments(problem, d));
    };

    // Projected gradient on the box of increments. sigma_min of the cumulative
    // map is >= 1/2 (its inverse is a difference operator), so a constant step
    // of 1/(2 n^2) converges linearly.
    std::vector<double> d(nd);
    for (std::size_t i = 0; i < nd; ++i)
        d[i] = 0.5 * (problem.lowers[i] + problem.uppers[i]);
    if (nd > 0) {
        const double step = 0.5 / static_cast<double>(n * n);
        std::vector<double> g(nd), rho(n);
        for (std::size_t iter = 0; iter < 400000; ++iter) {
            const auto v = chain_values_from_increments(problem, d);
            for (std::size_t a = 0; a < n; ++a)
                rho[a] = 2.0 * (v[a] - problem.targets[a]);
            double suffix = 0.0;
            for (std::size_t j = nd; j-- > k;) {
                suffix += rho[j + 1];
                g[j] = suffix;
            }
            double prefix = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                prefix += rho[j];
                g[j] = -prefix;
            }
            double move = 0.0;
            for (std::size_t i = 0; i < nd; ++i) {
                const double nx = std::clamp(d[i] - step * g[i], problem.lowers[i],
                                             problem.uppers[i]);
                move = std::max(move, std::abs(nx - d[i]));
                d[i] = nx;
            }
            if (move < std::min(grid_tol, 1e-12) * (1.0 + std::abs(d[0]))) break;
        }
    }
    std::vector<double> best_d = d;
    double best_obj = objective_of(best_d);

    // Exhaustive active-set enumeration: every increment is free, pinned low,
    // or pinned high; free increments come from an unconstrained least squares.
    if (n <= 5 && nd > 0) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < nd; ++i) combos *= 3;
        for (std::size_t code = 0; code < combos; ++code) {
            std::size_t c = code;
            std::vector<int> state(nd);
            std::vector<std::size_t> free_idx;
            std::vector<double> trial(nd);
            for (std::size_t i = 0; i < nd; ++i, c /= 3) {
                state[i] = static_cast<int>(c % 3);
                if (state[i] == 0)
                    free_idx.push_back(i);
                else
                    trial[i] = state[i] == 1 ? problem.lowers[i] : problem.uppers[i];
            }
            const std::size_t nf = free_idx.size();
            if (nf > 0) {
                std::vector<double> zero_free = trial;
                for (auto i : free_idx) zero_free[i] = 0.0;
                const auto v0 = chain_values_from_increments(problem, zero_free);
                Eigen::MatrixXd Amat = Eigen::MatrixXd::Zero(
                    static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nf));
                Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
                for (std::size_t a = 0; a < n; ++a)
                    rhs[static_cast<Eigen::Index>(a)] = problem.targets[a] - v0[a];
                for (std::size_t f = 0; f < nf; ++f) {
                    const std::size_t j = free_idx[f];
                    if (j >= k)
                        for (std::size_t a = j + 1; a < n; ++a)
                            Amat(static_cast<Eigen::Index>(a),
                                 static_cast<Eigen::Index>(f)) = 1.0;
                    else
                        for (std::size_t a = 0; a <= j; ++a)
                            Amat(static_cast<Eigen::Index>(a),
                                 static_cast<Eigen::Index>(f)) = -1.0;
                }
                Eigen::VectorXd sol = Amat.colPivHouseholderQr().solve(rhs);
                bool ok = true;
                for (std::size_t f = 0; f < nf; ++f) {
                    const std::size_t j = free_idx[f];
                    const double x = sol[static_cast<Eigen::Index>(f)];
                    if (x < problem.lowers[j] - 1e-11 || x > problem.uppers[j] + 1e-11) {
                        ok = false;
                        break;
                    }
                    trial[j] = std::clamp(x, problem.lowers[j], problem.uppers[j]);
                }
                if (!ok) continue;
            }
            const double obj = objective_of(trial);
            if (obj < best_obj) {
                best_obj = obj;
                best_d = trial;
            }
        }
    }

    FitResult out;
    out.values = chain_values_from_increments(problem, best_d);
    out.objective = best_obj;
    out.kkt_residual = chain_kkt_residual(problem, out.values);
    return out;
}

namespace {

// Rebuilds values outward from the anchor with increments clamped into their
// exact bounds, nudging by ulps where rounding in the addition would leave a
// realized increment outside; the slope predicate then holds with zero slack.
void enforce_membership(const std::vector<double>& knots, std::vector<double>& v,
                        std::size_t k, double a, double b) {
    const std::size_t n = knots.size();
    v[k] = 0.0;
    for (std::size_t i = k; i + 1 < n; ++i) {
        const double dz = knots[i + 1] - knots[i];
        const double lo = knots[i] >= 0.0 ? a * dz : 0.0;
        const double hi = b * dz;
        v[i + 1] = v[i] + std::clamp(v[i + 1] - v[i], lo, hi);
        while (v[i + 1] - v[i] < lo) v[i + 1] = std::nextafter(v[i + 1], INFINITY);
        while (v[i + 1] - v[i] > hi) v[i + 1] = std::nextafter(v[i + 1], -INFINITY);
    }
    for (std::size_t i = k; i-- > 0;) {
        const double dz = knots[i + 1] - knots[i];
        const double lo = knots[i] >= 0.0 ? a * dz : 0.0;
        const double hi = b * dz;
        v[i] = v[i + 1] - std::clamp(v[i + 1] - v[i], lo, hi);
        while (v[i + 1] - v[i] < lo) v[i] = std::nextafter(v[i], -INFINITY);
        while (v[i + 1] - v[i] > hi) v[i] = std::nextafter(v[i], INFINITY);
    }
}

}  // namespace

namespace {

struct SortEntry {
    std::uint64_t key;
    std::uint32_t idx;
};

// Order-preserving bijection from finite doubles to unsigned keys.
std::uint64_t order_key(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof(u));
    return (u & 0x8000000000000000ull) ? ~u : u ^ 0x8000000000000000ull;
}

// Stable LSD radix sort; constant-byte passes are skipped, which covers the
// high exponent bytes of typical projection batches.
void radix_sort(std::vector<SortEntry>& a, std::vector<SortEntry>& b) {
    const std::size_t n = a.size();
    b.resize(n);
    SortEntry* src = a.data();
    SortEntry* dst = b.data();
    for (int pass = 0; pass < 8; ++pass) {
        const int shift = pass * 8;
        std::uint32_t cnt[256] = {};
        for (std::size_t i = 0; i < n; ++i) ++cnt[(src[i].key >> shift) & 255u];
        if (cnt[(src[0].key >> shift) & 255u] == n) continue;
        std::uint32_t pos = 0;
        for (int c = 0; c < 256; ++c) {
            const std::uint32_t k = cnt[c];
            cnt[c] = pos;
            pos += k;
        }
        for (std::size_t i = 0; i < n; ++i)
            dst[cnt[(src[i].key >> shift) & 255u]++] = src[i];
        std::swap(src, dst);
    }
    if (src != a.data())
        std::copy(src, src + n, a.data());
}

}  // namespace

PiecewiseLinearActivation fit_activation(std::span<const double> projections,
                                         std::span<const double> labels, double a,
                                         double b, double tol) {
    return fit_activation(projections, labels, a, b, tol, {});
}

PiecewiseLinearActivation fit_activation(std::span<const double> projections,
                                         std::span<const double> labels, double a,
                                         double b, double tol,
                                         std::span<double> fitted) {
    if (projections.size() != labels.size() || projections.empty())
        throw std::invalid_argument("fit_activation: list size mismatch");
    if (!fitted.empty() && fitted.size() != projections.size())
        throw std::invalid_argument("fit_activation: fitted size mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("fit_activation: tol must be positive");
    if (!(a >= 0.0 && a <= b) || !std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("fit_activation: need 0 <= a <= b");
    if (!all_finite(projections) || !all_finite(labels))
        throw std::invalid_argument("fit_activation: non-finite input");

    const std::size_t m = projections.size();
    thread_local std::vector<SortEntry> order, scratch;
    thread_local std::vector<double> knots, targets, weights, lo, hi, values;
    thread_local std::vector<std::uint32_t> node_of;
    order.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        order[i] = {order_key(projections[i]), static_cast<std::uint32_t>(i)};
    radix_sort(order, scratch);

    // Collapse equal projections to their label mean with multiplicity weight;
    // splice in the anchor if no projection sits at zero.
    knots.clear();
    targets.clear();
    weights.clear();
    node_of.resize(m);
    std::size_t k = static_cast<std::size_t>(-1);
    std::size_t i = 0;
    while (i < m) {
        const double z = projections[order[i].idx];
        std::size_t j = i;
        double sum = 0.0;
        while (j < m && projections[order[j].idx] == z) sum += labels[order[j++].idx];
        if (k == static_cast<std::size_t>(-1) && z >= 0.0) {
            if (z != 0.0) {
                knots.push_back(0.0);
                targets.push_back(0.0);
                weights.push_back(1.0);
            }
            k = knots.size() - (z == 0.0 ? 0 : 1);
        }
        knots.push_back(z);
        targets.push_back(sum / static_cast<double>(j - i));
        weights.push_back(static_cast<double>(j - i));
        for (std::size_t p = i; p < j; ++p)
            node_of[p] = static_cast<std::uint32_t>(knots.size() - 1);
        i = j;
    }
    if (k == static_cast<std::size_t>(-1)) {
        k = knots.size();
        knots.push_back(0.0);
        targets.push_back(0.0);
        weights.push_back(1.0);
    }

    const std::size_t n = knots.size();
    lo.resize(n - 1);
    hi.resize(n - 1);
    for (std::size_t s = 0; s + 1 < n; ++s) {
        const double dz = knots[s + 1] - knots[s];
        lo[s] = knots[s] >= 0.0 ? a * dz : 0.0;
        hi[s] = b * dz;
    }

    values.resize(n);
    solve_anchored({targets, weights, lo, hi, k}, values);
    enforce_membership(knots, values, k, a, b);
    // "+ 0.0" mirrors evaluation at an exact knot, which adds a zero
    // interpolation term (and thus normalizes -0.0 the same way).
    if (!fitted.empty())
        for (std::size_t p = 0; p < m; ++p)
            fitted[order[p].idx] = values[node_of[p]] + 0.0;
    return PiecewiseLinearActivation(knots, values, a, b);
}

}  // namespace sim

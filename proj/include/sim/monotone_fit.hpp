#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sim/types.hpp"

namespace sim {

/// Chain-constrained least squares: minimize sum_i (v_i - targets_i)^2
/// subject to lowers_i <= v_{i+1} - v_i <= uppers_i and v_anchor = 0.
struct ChainQP {
    std::vector<double> targets;
    std::vector<double> lowers;
    std::vector<double> uppers;
    std::size_t anchor = 0;
};

struct FitResult {
    std::vector<double> values;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

/// Exact dynamic program over the chain (derivative-space value functions);
/// O(n^2) worst case, near-linear on generic data. tol is validated but the
/// solution is exact up to floating-point rounding.
FitResult solve_chain_qp(const ChainQP& problem, double tol);

/// Independent verification path: projected gradient in increment space run
/// to stationarity, plus exhaustive active-set enumeration for n <= 5.
/// Rejects n > 10.
FitResult brute_fit_oracle(const ChainQP& problem, double grid_tol);

/// Best-fit activation in U_(a,b): inserts the (0,0) anchor if absent, sorts
/// by projection (stable ties, equal projections collapsed to their label
/// mean with multiplicity weight) and solves the chain program with
/// lowers = a*dz on the nonnegative side, 0 on the negative side, uppers = b*dz.
PiecewiseLinearActivation fit_activation(std::span<const double> projections,
                                         std::span<const double> labels, double a,
                                         double b, double tol);

/// Same fit; additionally writes the activation's value at every projection
/// (bit-identical to evaluating the result, without the per-point search).
PiecewiseLinearActivation fit_activation(std::span<const double> projections,
                                         std::span<const double> labels, double a,
                                         double b, double tol,
                                         std::span<double> fitted);

}  // namespace sim

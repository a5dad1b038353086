#pragma once

#include <span>
#include <utility>

namespace dotsim {

/// Shallow-barrier tunnel-coupling model. The WKB action is linear in the
/// barrier voltage, phi = a - b V, and
///     t_c(V) = t0 (sqrt(exp(2 phi) + 1) - exp(phi)),
/// which decays as t0 exp(-phi)/2 for a tall barrier and saturates to t0 as
/// the barrier vanishes.
struct WkbBarrier {
    double t0;  ///< prefactor, GHz
    double a;   ///< action offset
    double b;   ///< action slope, 1/mV

    double action(double v_mv) const { return a - b * v_mv; }
    void validate() const;
};

double tc_of_voltage(const WkbBarrier& w, double v_mv);

struct WkbFitOptions {
    double j_min = 0.0;        ///< drop points below this J (model breaks at low t_c)
    int max_iterations = 500;
    double param_tol = 1e-8;   ///< relative parameter change at convergence
};

struct WkbFitResult {
    WkbBarrier barrier{0, 0, 0};
    double residual = 0.0;  ///< sum of squared log-J residuals
    bool converged = false;
    int iterations = 0;
};

/// Least-squares fit of (t0, a, b) to exchange-vs-voltage data taken on the
/// symmetric axis (delta = 0, charging energy u). Residuals are taken in
/// log J so every decade weighs equally. Throws std::invalid_argument on
/// fewer than 4 usable points, non-positive J, or degenerate voltages.
WkbFitResult fit_wkb(std::span<const std::pair<double, double>> data_v_j,
                     double u, const WkbBarrier& init,
                     const WkbFitOptions& opts = {});

}

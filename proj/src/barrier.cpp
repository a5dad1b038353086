#include "dotsim/barrier.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dotsim/fitting.hpp"
#include "dotsim/hubbard.hpp"

namespace dotsim {

void WkbBarrier::validate() const {
    if (!(t0 > 0.0) || !std::isfinite(t0))
        throw std::invalid_argument("WkbBarrier: t0 must be positive");
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("WkbBarrier: b must be positive");
    if (!std::isfinite(a))
        throw std::invalid_argument("WkbBarrier: a must be finite");
}

double tc_of_voltage(const WkbBarrier& w, double v_mv) {
    w.validate();
    const double phi = w.action(v_mv);
    // exp(2 phi) overflows near phi ~ 354; the series limit is exact there.
    if (phi > 350.0) return w.t0 * std::exp(-phi) / 2.0;
    // sqrt(x^2+1) - x written as 1/(sqrt(x^2+1) + x): no cancellation at
    // large phi, and it tends to t0 as phi -> -inf.
    const double e = std::exp(phi);
    return w.t0 / (std::sqrt(e * e + 1.0) + e);
}

WkbFitResult fit_wkb(std::span<const std::pair<double, double>> data_v_j,
                     double u, const WkbBarrier& init,
                     const WkbFitOptions& opts) {
    init.validate();
    if (!(u > 0.0)) throw std::invalid_argument("fit_wkb: u must be positive");

    std::vector<double> v, logj;
    for (const auto& [vi, ji] : data_v_j) {
        if (!(ji > 0.0)) throw std::invalid_argument("fit_wkb: J values must be positive");
        if (ji < opts.j_min) continue;
        v.push_back(vi);
        logj.push_back(std::log(ji));
    }
    if (v.size() < 4)
        throw std::invalid_argument("fit_wkb: need at least 4 usable data points");
    double vmin = v[0], vmax = v[0];
    for (double vi : v) {
        vmin = std::min(vmin, vi);
        vmax = std::max(vmax, vi);
    }
    if (vmax - vmin < 1e-12)
        throw std::invalid_argument("fit_wkb: degenerate data (all voltages equal)");

    // Fit in (log t0, a, log b) so positivity is built in.
    const auto residuals = [&](const Eigen::VectorXd& p) {
        WkbBarrier w{std::exp(p(0)), p(1), std::exp(p(2))};
        Eigen::VectorXd r(static_cast<int>(v.size()));
        for (int i = 0; i < r.size(); ++i) {
            const DotPairParams dp(u, tc_of_voltage(w, v[i]), 0.0);
            r(i) = std::log(exchange_sop_approx(dp)) - logj[i];
        }
        return r;
    };

    Eigen::VectorXd x0(3);
    x0 << std::log(init.t0), init.a, std::log(init.b);
    LevMarOptions lm;
    lm.max_iterations = opts.max_iterations;
    lm.param_tol = opts.param_tol;
    const LevMarResult res = levmar(residuals, x0, lm);

    WkbFitResult out;
    out.barrier = WkbBarrier{std::exp(res.params(0)), res.params(1),
                             std::exp(res.params(2))};
    out.residual = res.rss;
    out.converged = res.converged;
    out.iterations = res.iterations;
    return out;
}

}

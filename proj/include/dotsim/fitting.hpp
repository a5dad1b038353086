#pragma once

#include <Eigen/Dense>
#include <functional>

namespace dotsim {

struct LevMarOptions {
    int max_iterations = 500;
    double param_tol = 1e-8;  ///< relative parameter change at convergence
    double lambda0 = 1e-3;
};

struct LevMarResult {
    Eigen::VectorXd params;
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Damped least squares with a central-difference Jacobian. Small problems
/// only (a handful of parameters); returns best-so-far on stall.
LevMarResult levmar(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& x0, const LevMarOptions& opts = {});

}

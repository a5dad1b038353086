#include "dotsim/fitting.hpp"

#include <cmath>

namespace dotsim {

namespace {

Eigen::MatrixXd jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, int m) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd j(m, n);
    for (int k = 0; k < n; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return j;
}

}  // namespace

LevMarResult levmar(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& x0, const LevMarOptions& opts) {
    LevMarResult out;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd r = residuals(x);
    double rss = r.squaredNorm();
    double lambda = opts.lambda0;
    const int m = static_cast<int>(r.size());
    const int n = static_cast<int>(x.size());

    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        const Eigen::MatrixXd j = jacobian(residuals, x, m);
        const Eigen::MatrixXd a = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + rss)) {
            out.converged = true;
            break;
        }

        bool accepted = false;
        for (int tries = 0; tries < 25; ++tries) {
            Eigen::MatrixXd damped = a;
            for (int k = 0; k < n; ++k)
                damped(k, k) += lambda * std::max(a(k, k), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const Eigen::VectorXd x_new = x + step;
            const Eigen::VectorXd r_new = residuals(x_new);
            const double rss_new = r_new.squaredNorm();
            if (rss_new <= rss) {
                double rel = 0.0;
                for (int k = 0; k < n; ++k)
                    rel = std::max(rel,
                                   std::abs(step(k)) / (std::abs(x(k)) + 1e-12));
                x = x_new;
                r = r_new;
                rss = rss_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (rel < opts.param_tol) out.converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted || out.converged) break;
    }

    out.params = x;
    out.rss = rss;
    out.iterations = iter + 1;
    return out;
}

}

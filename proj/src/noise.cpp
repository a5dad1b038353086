#include "dotsim/noise.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dotsim/errors.hpp"

namespace dotsim {

namespace {

double simpson(double fa, double fm, double fb, double a, double b) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(fa, flm, fm, a, m);
    const double right = simpson(fm, frm, fb, m, b);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate_panel(const std::function<double(double)>& f, double a,
                       double b, double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b),
                            tol, 40);
}

/// Int_{lo}^{hi} S(w) sin^2(w t / 2) / w^2 dw. Panels follow a log grid in
/// the smooth region and half-period steps once the filter oscillates, so
/// the adaptive rule never straddles many oscillations.
double filtered_integral(const std::function<double(double)>& s, double lo,
                         double hi, double t, double rel_tol) {
    if (hi <= lo) return 0.0;
    const auto f = [&](double w) {
        const double sn = std::sin(0.5 * w * t);
        return s(w) * sn * sn / (w * w);
    };

    std::vector<double> knots{lo};
    const double osc_start = std::min(8.0 / t, hi);
    double w = lo;
    while (w < osc_start) {
        w = std::min(w * 1.6, osc_start);
        knots.push_back(w);
    }
    const double step = M_PI / t;
    while (w < hi) {
        w = std::min(w + step, hi);
        knots.push_back(w);
    }

    // First a coarse pass to apportion the tolerance, then adaptive panels.
    std::vector<double> rough(knots.size() - 1);
    double rough_abs = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i], b = knots[i + 1];
        rough[i] = simpson(f(a), f(0.5 * (a + b)), f(b), a, b);
        rough_abs += std::abs(rough[i]);
    }
    if (rough_abs <= 0.0) rough_abs = std::numeric_limits<double>::min();

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double share = std::max(std::abs(rough[i]) / rough_abs, 1e-6);
        const double tol = rel_tol * rough_abs * share;
        total += integrate_panel(f, knots[i], knots[i + 1], tol);
    }
    return total;
}

}  // namespace

double NoiseModel::spectral_density(double omega) const {
    switch (kind) {
        case SpectrumKind::one_over_f:
            return amplitude * amplitude / omega;
        case SpectrumKind::white:
            return s0;
    }
    return 0.0;
}

void NoiseModel::validate() const {
    if (kind == SpectrumKind::one_over_f && !(amplitude > 0.0))
        throw std::invalid_argument("NoiseModel: amplitude must be positive");
    if (kind == SpectrumKind::white && !(s0 > 0.0))
        throw std::invalid_argument("NoiseModel: s0 must be positive");
    if (!(t_avg_ns > 0.0))
        throw std::invalid_argument("NoiseModel: averaging time must be positive");
}

NoiseModel NoiseModel::one_over_f(double amplitude_mv, double t_avg_s) {
    NoiseModel n;
    n.kind = SpectrumKind::one_over_f;
    n.amplitude = amplitude_mv;
    n.t_avg_ns = t_avg_s * 1e9;
    n.validate();
    return n;
}

NoiseModel NoiseModel::white(double s0_mv2_s, double t_avg_s) {
    NoiseModel n;
    n.kind = SpectrumKind::white;
    n.s0 = s0_mv2_s * 1e9;  // mV^2 s -> mV^2 ns
    n.t_avg_ns = t_avg_s * 1e9;
    n.validate();
    return n;
}

double sigma_v_effective(const NoiseModel& n, double t_ns) {
    n.validate();
    if (!(t_ns > 0.0))
        throw std::invalid_argument("sigma_v_effective: t must be positive");
    const double lo = 1.0 / n.t_avg_ns;
    const double hi = 1e4 / t_ns;
    if (hi <= lo)
        throw NumericalError("sigma_v_effective",
                             "frequency window is empty (T too short)");
    const auto s = [&](double w) { return n.spectral_density(w); };
    const double integral = filtered_integral(s, lo, hi, t_ns, 1e-6);
    return std::sqrt(integral * 2.0 / M_PI) / t_ns;
}

double insensitivity(double j, const Eigen::VectorXd& grad) {
    const double norm = grad.norm();
    if (norm == 0.0) return std::numeric_limits<double>::infinity();
    return j / norm;
}

GateCorrelation GateCorrelation::identity(int n_gates) {
    return diagonal(Eigen::VectorXd::Ones(n_gates));
}

GateCorrelation GateCorrelation::scaled_identity(int n_gates, double c) {
    return diagonal(Eigen::VectorXd::Constant(n_gates, std::sqrt(c)));
}

GateCorrelation GateCorrelation::diagonal(Eigen::VectorXd a_weights) {
    GateCorrelation g;
    g.weights = std::move(a_weights);
    g.validate();
    return g;
}

GateCorrelation GateCorrelation::geometric(
    const std::vector<std::string>& gates, double plunger_weight,
    double exchange_weight) {
    Eigen::VectorXd w(static_cast<int>(gates.size()));
    for (int i = 0; i < w.size(); ++i)
        w(i) = (!gates[i].empty() && gates[i][0] == 'P') ? plunger_weight
                                                         : exchange_weight;
    return diagonal(std::move(w));
}

GateCorrelation GateCorrelation::matrix(Eigen::MatrixXd c) {
    GateCorrelation g;
    g.full = std::move(c);
    g.validate();
    return g;
}

Eigen::MatrixXd GateCorrelation::matrix_for(int n_gates) const {
    if (full.size() > 0) {
        if (full.rows() != n_gates)
            throw std::invalid_argument("GateCorrelation: matrix dimension mismatch");
        return full;
    }
    if (weights.size() == 0)
        return Eigen::MatrixXd::Identity(n_gates, n_gates);
    if (weights.size() != n_gates)
        throw std::invalid_argument("GateCorrelation: weight dimension mismatch");
    return weights.array().square().matrix().asDiagonal();
}

void GateCorrelation::validate() const {
    if (full.size() > 0) {
        if (full.rows() != full.cols())
            throw std::invalid_argument("GateCorrelation: matrix must be square");
        const double scale = full.cwiseAbs().maxCoeff();
        if ((full - full.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (scale + 1.0))
            throw std::invalid_argument("GateCorrelation: matrix must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.compute(full, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10 * (scale + 1.0))
            throw std::invalid_argument(
                "GateCorrelation: matrix must be positive semi-definite");
    }
    for (int i = 0; i < weights.size(); ++i)
        if (!(weights(i) > 0.0))
            throw std::invalid_argument("GateCorrelation: weights must be positive");
}

double generalized_insensitivity(double j, const Eigen::VectorXd& grad,
                                 const GateCorrelation& c) {
    const Eigen::MatrixXd m = c.matrix_for(static_cast<int>(grad.size()));
    const double q = grad.dot(m * grad);
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    return j / std::sqrt(q);
}

double charge_envelope(double j, double i, double sigma_v, double t_ns) {
    if (std::isinf(i)) return 1.0;
    if (!(i > 0.0)) throw std::invalid_argument("charge_envelope: i must be positive");
    const double x = 2.0 * M_PI * j * t_ns * sigma_v / i;
    return std::exp(-x * x);
}

double envelope_from_spectrum(const std::function<double(double)>& s_j,
                              double t_ns, double t_avg_ns) {
    if (t_ns == 0.0) return 1.0;
    if (!(t_ns > 0.0) || !(t_avg_ns > 0.0))
        throw std::invalid_argument("envelope_from_spectrum: t, T must be positive");
    const double lo = 1.0 / t_avg_ns;
    const double hi = 1e4 / t_ns;
    if (hi <= lo)
        throw NumericalError("envelope_from_spectrum", "frequency window is empty");
    const double integral = filtered_integral(s_j, lo, hi, t_ns, 1e-6);
    const double w = 2.0 * M_PI;
    return std::exp(-w * w * (2.0 / M_PI) * integral);
}

double hyperfine_envelope(double t_ns, double t_hf_ns) {
    if (std::isinf(t_hf_ns)) return 1.0;
    if (!(t_hf_ns > 0.0))
        throw std::invalid_argument("hyperfine_envelope: t_hf must be positive");
    const double x = t_ns / t_hf_ns;
    return std::exp(-x * x);
}

void FieldGrid::validate() const {
    const auto n_gates = responses.rows();
    const auto n_cells = responses.cols();
    if (n_gates < 1 || n_cells < 1)
        throw std::invalid_argument("FieldGrid: empty grid");
    if (n_cells < n_gates)
        throw std::invalid_argument("FieldGrid: need at least n_gates cells");
    if (volumes.size() != n_cells || noise.size() != n_cells)
        throw std::invalid_argument("FieldGrid: dimension mismatch");
    for (int i = 0; i < volumes.size(); ++i)
        if (!(volumes(i) > 0.0))
            throw std::invalid_argument("FieldGrid: volumes must be positive");
}

Eigen::VectorXd project_noise_to_gates(const FieldGrid& f) {
    f.validate();
    const Eigen::MatrixXd gv = f.responses * f.volumes.asDiagonal();
    const Eigen::MatrixXd m = gv * f.responses.transpose();
    const Eigen::VectorXd b = gv * f.noise;
    // Minimum-norm solution covers rank-deficient gate responses.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    return cod.solve(b);
}

}

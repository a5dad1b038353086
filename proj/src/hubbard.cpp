#include "dotsim/hubbard.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dotsim {

void DotPairParams::validate() const {
    if (!(u_s > 0.0) || !std::isfinite(u_s))
        throw std::invalid_argument("DotPairParams: u_s must be positive");
    if (u_t < u_s || !std::isfinite(u_t))
        throw std::invalid_argument("DotPairParams: u_t must be >= u_s");
    if (tc_s < 0.0 || tc_t < 0.0)
        throw std::invalid_argument("DotPairParams: tunnel couplings must be >= 0");
    if (!std::isfinite(delta))
        throw std::invalid_argument("DotPairParams: delta must be finite");
}

Eigen::Matrix3d singlet_hamiltonian(const DotPairParams& p) {
    p.validate();
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    h(0, 0) = p.u_s + p.delta;
    h(2, 2) = p.u_s - p.delta;
    h(0, 1) = h(1, 0) = p.tc_s;
    h(1, 2) = h(2, 1) = p.tc_s;
    return h;
}

SingletSpectrum singlet_spectrum(const DotPairParams& p) {
    const Eigen::Matrix3d h = singlet_hamiltonian(p);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.compute(h, Eigen::EigenvaluesOnly);
    SingletSpectrum s;
    s.energies = {es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
    std::sort(s.energies.begin(), s.energies.end());
    s.triplet_energy = 0.0;
    return s;
}

double exchange_exact(const DotPairParams& p) {
    const SingletSpectrum s = singlet_spectrum(p);
    return s.triplet_energy - s.energies[0];
}

double exchange_detuning_approx(const DotPairParams& p) {
    p.validate();
    const double q = (p.u_s - std::abs(p.delta)) / 2.0;
    return std::sqrt(p.tc_s * p.tc_s + q * q) - q;
}

double exchange_sop_approx(const DotPairParams& p) {
    p.validate();
    if (std::abs(p.delta) >= p.u_s)
        throw std::domain_error("exchange_sop_approx: |delta| must be < U");
    const double gap =
        std::sqrt(2.0 * p.tc_s * p.tc_s + p.u_s * p.u_s / 4.0) - p.u_s / 2.0;
    return gap / (1.0 - (p.delta / p.u_s) * (p.delta / p.u_s));
}

double exchange_excited_corrected(const DotPairParams& p) {
    p.validate();
    return p.tc_s * p.tc_s / p.u_s - p.tc_t * p.tc_t / p.u_t;
}

double dj_ddelta(const DotPairParams& p) {
    p.validate();
    const double h = std::max(1e-6 * p.u_s, 1e-9);
    DotPairParams hi = p;
    DotPairParams lo = p;
    hi.delta += h;
    lo.delta -= h;
    return (exchange_exact(hi) - exchange_exact(lo)) / (2.0 * h);
}

}

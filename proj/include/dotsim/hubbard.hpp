#pragma once

#include <Eigen/Dense>
#include <array>

namespace dotsim {

/// Hubbard parameters of one exchange-coupled dot pair. All energies are
/// quoted as E/h in GHz; detuning is referenced to the center of the (1,1)
/// charge cell, not to an anti-crossing.
struct DotPairParams {
    double u_s;    ///< singlet charging energy
    double tc_s;   ///< singlet tunnel coupling
    double delta;  ///< chemical-potential difference between the dots
    double u_t;    ///< triplet charging energy (defaults to u_s)
    double tc_t;   ///< triplet tunnel coupling (defaults to tc_s)

    DotPairParams(double u, double tc, double d)
        : u_s(u), tc_s(tc), delta(d), u_t(u), tc_t(tc) {}
    DotPairParams(double u, double tc, double d, double ut, double tct)
        : u_s(u), tc_s(tc), delta(d), u_t(ut), tc_t(tct) {}

    /// Throws std::invalid_argument when u_s <= 0, u_t < u_s, or a tunnel
    /// coupling is negative.
    void validate() const;
};

struct SingletSpectrum {
    std::array<double, 3> energies;  ///< ascending
    double triplet_energy;           ///< reference; 0 in the basic model
};

/// Singlet-sector Hamiltonian in the ordered basis {(2,0)S, (1,1)S, (0,2)S}:
/// diag(U+delta, 0, U-delta) with coupling tc_s between (1,1)S and each
/// doubly-occupied state. The convention absorbs the sqrt(2) of the
/// second-quantized hopping so the zero-detuning gap has its closed form
/// sqrt(2 tc^2 + U^2/4) - U/2.
Eigen::Matrix3d singlet_hamiltonian(const DotPairParams& p);

SingletSpectrum singlet_spectrum(const DotPairParams& p);

/// J = E_triplet - E_singlet,ground with the (1,1) triplet pinned at 0.
double exchange_exact(const DotPairParams& p);

/// Detuning-regime form sqrt(tc^2 + (U-|delta|)^2/4) - (U-|delta|)/2.
double exchange_detuning_approx(const DotPairParams& p);

/// Symmetric-operating-point form
/// [1/(1 - delta^2/U^2)] [sqrt(2 tc^2 + U^2/4) - U/2].
/// Throws std::domain_error when |delta| >= U.
double exchange_sop_approx(const DotPairParams& p);

/// Zero-detuning estimate with the excited triplet anti-crossing included:
/// (tc_s^2/u_s) - (tc_t^2/u_t).
double exchange_excited_corrected(const DotPairParams& p);

/// dJ/d(delta) of exchange_exact by central difference,
/// step max(1e-6 U, 1e-9).
double dj_ddelta(const DotPairParams& p);

}

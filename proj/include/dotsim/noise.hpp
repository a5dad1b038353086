#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace dotsim {

enum class SpectrumKind { one_over_f, white };
enum class FilterKind { square_pulse };

/// Gate-referred voltage-noise model. For the 1/f kind the spectral density
/// is S_V(w) = A^2 / w; the white level s0 exists for validating the
/// filtered-variance quadrature against its closed form. Internal time unit
/// is ns (angular frequency in rad/ns).
struct NoiseModel {
    SpectrumKind kind = SpectrumKind::one_over_f;
    double amplitude = 0.0;   ///< A, mV (1/f)
    double s0 = 0.0;          ///< white level, mV^2 ns
    double t_avg_ns = 1e9;    ///< averaging time T
    FilterKind filter = FilterKind::square_pulse;

    double spectral_density(double omega) const;
    void validate() const;

    static NoiseModel one_over_f(double amplitude_mv, double t_avg_s);
    static NoiseModel white(double s0_mv2_s, double t_avg_s);
};

/// RMS voltage seen through the square-pulse filter:
///   (sigma_V t)^2 = (2/pi) Int_{1/T}^{inf} dw S_V(w) sin^2(w t/2) / w^2,
/// evaluated by adaptive quadrature up to 1e4/t (the tail is negligible for
/// both spectra). Result in mV.
double sigma_v_effective(const NoiseModel& n, double t_ns);

/// Fringe-count figure of merit I = J / |grad J|, units of voltage.
/// Returns +inf (saturated) for an identically zero gradient.
double insensitivity(double j, const Eigen::VectorXd& grad);

/// Per-gate noise weighting C_jk. Diagonal form C = diag(A_j^2) by default;
/// a full symmetric PSD matrix is accepted for gate-to-gate correlations.
struct GateCorrelation {
    Eigen::VectorXd weights;  ///< A_j; used when `full` is empty
    Eigen::MatrixXd full;     ///< optional full C

    static GateCorrelation identity(int n_gates);
    static GateCorrelation scaled_identity(int n_gates, double c);
    static GateCorrelation diagonal(Eigen::VectorXd a_weights);
    /// Geometric weighting: plunger gates (names starting with 'P') get
    /// A_P, everything else A_X. Defaults A_P = 1/4, A_X = 1.
    static GateCorrelation geometric(const std::vector<std::string>& gates,
                                     double plunger_weight = 0.25,
                                     double exchange_weight = 1.0);
    static GateCorrelation matrix(Eigen::MatrixXd c);

    Eigen::MatrixXd matrix_for(int n_gates) const;
    void validate() const;
};

/// I = J / sqrt(grad^T C grad). Reduces to insensitivity() for C = identity.
double generalized_insensitivity(double j, const Eigen::VectorXd& grad,
                                 const GateCorrelation& c);

/// Gaussian quasi-static charge-noise envelope
///   G = exp[-(2 pi J t)^2 (sigma_v / i)^2].
double charge_envelope(double j, double i, double sigma_v, double t_ns);

/// Envelope from an explicit spectral density of J fluctuations (GHz^2 ns):
///   G(t) = exp[-(2 pi)^2 (2/pi) Int_{1/T} dw S_J(w) sin^2(w t/2)/w^2].
/// With S_J = |grad|^2 S_V this reproduces charge_envelope composed with
/// sigma_v_effective.
double envelope_from_spectrum(const std::function<double(double)>& s_j,
                              double t_ns, double t_avg_ns);

/// Quasi-static magnetic-dephasing envelope exp[-(t/t_hf)^2]; t_hf = +inf
/// disables the channel.
double hyperfine_envelope(double t_ns, double t_hf_ns);

/// Spatial samples of the per-gate potential responses g_j(r) and of a
/// charge-noise potential, for projecting noise onto gate voltages.
struct FieldGrid {
    Eigen::MatrixXd responses;  ///< n_gates x n_cells
    Eigen::VectorXd volumes;    ///< n_cells
    Eigen::VectorXd noise;      ///< potential at each cell
    Eigen::MatrixXd positions;  ///< 3 x n_cells, informational

    void validate() const;
};

/// Gate-referred noise vector: the volume-weighted least-squares projection
/// of the noise field onto the gate responses (minimum-norm when the Gram
/// matrix is rank-deficient). Units mV.
Eigen::VectorXd project_noise_to_gates(const FieldGrid& f);

}

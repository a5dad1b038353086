#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dotsim/device.hpp"
#include "dotsim/grid.hpp"
#include "dotsim/noise.hpp"

namespace dotsim {

enum class RabiMode { analytic, monte_carlo };

struct RabiOptions {
    RabiMode mode = RabiMode::analytic;
    uint64_t seed = 0;
    int n_samples = 2000;
    double t_hf_ns = std::numeric_limits<double>::infinity();
    double contrast = 0.75;  ///< 3/4 for the 120-degree rotation axis
    int readout_shots = 0;   ///< 0: noiseless probabilities
    int threads = 0;
};

std::vector<double> make_time_grid(double t_max_ns, std::size_t n_points);

/// Singlet-probability trace P(t) = 1 - (c/2)[1 - G(t) cos(2 pi J t)].
/// Analytic mode multiplies the quasi-static charge-noise envelope and the
/// hyperfine envelope onto the oscillation; monte_carlo mode averages
/// trajectories with one Gaussian gate-voltage offset each (the brute-force
/// oracle for the analytic envelope).
TimeTrace rabi_trace(const DeviceModel& d, const GateVector& v,
                     std::span<const double> times,
                     const std::optional<NoiseModel>& noise,
                     const GateCorrelation& corr, const RabiOptions& opts = {});

/// Rabi oscillations vs detuning (rows) and evolution time (columns) at a
/// fixed exchange-axis bias: the chevron.
ScanGrid chevron_scan(const DeviceModel& d, const ControlFrame& f,
                      const Axis& delta_axis, const Axis& time_axis, double vx,
                      const std::optional<NoiseModel>& noise,
                      const GateCorrelation& corr, const RabiOptions& opts = {});

/// Incoherent two-frequency mixture. The second exchange energy is
/// j2_scale * J + j2_offset, or J at second_bias when given (then with its
/// own envelope).
struct TwoFreqOptions {
    double weight = 1.0;  ///< population of the primary channel
    double j2_offset = 0.0;
    double j2_scale = 1.0;
    std::optional<GateVector> second_bias;
};

TimeTrace two_freq_trace(const DeviceModel& d, const GateVector& v,
                         std::span<const double> times, const TwoFreqOptions& tf,
                         const std::optional<NoiseModel>& noise,
                         const GateCorrelation& corr,
                         const RabiOptions& opts = {});

/// Probability after a fixed evolution at each (detuning, exchange-bias)
/// point; fringes are loci of constant J t. The optional mixture adds the
/// faint secondary fringe set.
ScanGrid fingerprint_scan(const DeviceModel& d, const ControlFrame& f,
                          const Axis& delta_axis, const Axis& vx_axis,
                          double evolve_time_ns = 500.0,
                          const std::optional<NoiseModel>& noise = std::nullopt,
                          const GateCorrelation& corr = {},
                          const TwoFreqOptions& tf = {},
                          const RabiOptions& opts = {});

struct RabiFit {
    double frequency = 0.0;  ///< GHz
    double decay_1e = 0.0;   ///< ns
    double n_rabi = 0.0;     ///< frequency * decay_1e
    double residual = 0.0;
    bool converged = false;
};

/// Least-squares fit of a cos(2 pi f t + phi) exp[-(t/tau)^2] + c, seeded
/// from the spectrum. The optional high-pass subtracts a centered moving
/// mean of width 1/cutoff before fitting. Throws FitError when the trace
/// carries no oscillation or the fit stalls, std::invalid_argument when the
/// sampling is insufficient (needs >= 8 periods, >= 8 points per period).
RabiFit fit_rabi(const TimeTrace& trace,
                 std::optional<double> highpass_cutoff_ghz = std::nullopt);

/// Same model with two Gaussian envelopes, one 1/e time pinned (the product
/// of two Gaussians is a single Gaussian, so both times are identifiable
/// only with one channel known). Returns the free 1/e time.
RabiFit fit_rabi_two_gaussian(const TimeTrace& trace, double tau_fixed_ns,
                              std::optional<double> highpass_cutoff_ghz = std::nullopt);

struct InsensitivityEstimate {
    double insens = 0.0;  ///< mV
    double j = 0.0;       ///< GHz, from the unperturbed fit
    GateVector grad;      ///< GHz/mV, finite-difference protocol estimate
};

/// The measurement protocol for I: fit the Rabi frequency at v and at
/// v +/- perturbation on every gate, form centered differences, apply
/// I = J/|grad J|.
InsensitivityEstimate measured_insensitivity(const DeviceModel& d,
                                             const GateVector& v,
                                             double perturbation_mv = 0.5);

struct Spectrum {
    std::vector<double> frequency;  ///< GHz
    std::vector<double> magnitude;
};

/// Magnitude spectrum after mean subtraction and a Hann window (zero-padded
/// to a power of two). Requires a uniform time grid.
Spectrum fft_spectrum(const TimeTrace& trace);

/// Strongest local maxima, parabolic-interpolated, strongest first.
std::vector<double> peak_frequencies(const Spectrum& spec, int n_peaks);

struct ContourSweepOptions {
    uint64_t seed = 1;
    int n_samples = 2000;
    double perturbation_mv = 0.5;
    double span_decay_times = 2.5;   ///< trace length in units of the 1/e time
    double points_per_period = 12.0;
    std::optional<double> highpass_cutoff_ghz;
    bool with_monte_carlo = true;
    int threads = 0;
};

struct ContourSweepRow {
    double delta = 0.0;
    double vx = 0.0;
    double j = 0.0;
    double i_meas = 0.0;      ///< protocol insensitivity
    double i_gen = 0.0;       ///< generalized (weighted) insensitivity
    double sigma_v = 0.0;     ///< mV at the trace length
    double n_pred = 0.0;      ///< i_meas / (2 pi sigma_v)
    double n_pred_gen = 0.0;  ///< i_gen / (2 pi sigma_v)
    double n_sim = 0.0;       ///< Monte-Carlo fringe count (0 when disabled)
    bool reachable = false;
};

/// Fig.-4-style sweep along a constant-J contour: protocol insensitivity,
/// generalized insensitivity, and simulated fringe counts per detuning.
std::vector<ContourSweepRow> insensitivity_contour_sweep(
    const DeviceModel& d, const ControlFrame& f, double j_target,
    std::span<const double> deltas, const NoiseModel& noise,
    const GateCorrelation& corr, const ContourSweepOptions& opts = {});

struct IvjRow {
    double vx = 0.0;
    double j = 0.0;
    double insens = 0.0;
};

/// J and I along the symmetric axis (delta = 0).
std::vector<IvjRow> i_vs_j_sweep(const DeviceModel& d, const ControlFrame& f,
                                 const Axis& vx_axis);

}

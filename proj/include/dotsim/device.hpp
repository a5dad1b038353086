#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "dotsim/barrier.hpp"
#include "dotsim/grid.hpp"

namespace dotsim {

using GateVector = Eigen::VectorXd;

/// Linear map from gate voltages to the Hubbard control parameters of one
/// dot pair. l_delta carries the detuning lever arms (GHz/mV), l_barrier the
/// dimensionless coefficients producing the effective barrier voltage fed to
/// the WKB model. The gates P1, P2 (detuning plungers) and X1 (exchange
/// gate) must be present; further gates are carried along for cross-talk.
struct DeviceModel {
    std::vector<std::string> gates;
    GateVector l_delta;
    GateVector l_barrier;
    WkbBarrier barrier{1.0, 0.0, 1.0};
    double u = 0.0;          ///< singlet charging energy, GHz
    double u_t = 0.0;        ///< triplet charging energy; defaults to u
    GateVector v0;           ///< reference bias, mV
    double cell_size = 0.0;  ///< (1,1) cell extent along the charge boundaries, mV

    int index_of(const std::string& name) const;
    int require_gate(const std::string& name) const;  ///< throws ConfigError
    int n_gates() const { return static_cast<int>(gates.size()); }
    void validate() const;

    static std::vector<std::string> default_gates();
    /// Synthetic seven-gate device with 10% cross-capacitance used throughout
    /// the bundled configs and tests.
    static DeviceModel reference();
};

struct ControlParams {
    double delta;      ///< GHz
    double barrier_v;  ///< effective barrier voltage, mV
    double tc;         ///< GHz
};

/// Calibrated control axes: v = v0 + u_detuning (delta/alpha) + u_exchange vx.
struct ControlFrame {
    GateVector u_detuning;
    GateVector u_exchange;
    GateVector v0;

    void validate() const;
};

ControlParams control_params(const DeviceModel& d, const GateVector& v);

/// J at a bias point via the exact two-site eigensolve. Throws
/// std::domain_error when the detuning leaves the (1,1) cell (|delta| >= U).
double exchange_of_voltages(const DeviceModel& d, const GateVector& v);

/// dJ/dV_j by central differences, one entry per gate (GHz/mV).
GateVector grad_j(const DeviceModel& d, const GateVector& v,
                  double step_mv = 0.01);

/// Detuning lever arm along the frame's detuning axis (GHz/mV).
double frame_lever_arm(const DeviceModel& d, const ControlFrame& f);

/// Ground-truth control frame of a synthetic device: the detuning axis is
/// the in-plane (P1, P2) direction of l_delta, and the exchange axis follows
/// the (1,1) cell center as X1 moves, which keeps delta = 0 along it.
ControlFrame frame_from_device(const DeviceModel& d);

GateVector frame_bias(const DeviceModel& d, const ControlFrame& f,
                      double delta, double vx);

struct ContourPoint {
    double delta = 0.0;
    double vx = 0.0;
    GateVector bias;
    double j = 0.0;
    bool reachable = false;
};

/// Constant-J contour: for each requested detuning, bisect the exchange-axis
/// coordinate until |J - j_target| / j_target < rel_tol. Unreachable
/// detunings are flagged rather than failing the whole contour.
std::vector<ContourPoint> constant_j_contour(const DeviceModel& d,
                                             const ControlFrame& f,
                                             double j_target,
                                             std::span<const double> deltas,
                                             double rel_tol = 1e-6);

/// Forward-modeled singlet-probability map over the (P1, P2) plane at a
/// fixed exchange-gate bias. Inside the (1,1) cell the pixel value is the
/// noiseless exchange-oscillation probability after evolve_time; outside
/// (past a charge boundary) the readout saturates at 1.
ScanGrid synth_stability_map(const DeviceModel& d, const Axis& p1,
                             const Axis& p2, double v_x1,
                             double evolve_time_ns, int threads = 0);

/// Recovers the control frame from two stability maps taken at different
/// exchange-gate biases: cell centers by thresholded centroid, detuning axis
/// orthogonal to a least-squares fit of the detected charge boundaries,
/// exchange axis through the two cell centers. Throws CalibrationError when
/// no closed cell is found.
ControlFrame calibrate_axes(const ScanGrid& map_lo, const ScanGrid& map_hi);

}

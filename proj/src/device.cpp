#include "dotsim/device.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dotsim/errors.hpp"
#include "dotsim/hubbard.hpp"
#include "dotsim/parallel.hpp"

namespace dotsim {

int DeviceModel::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < gates.size(); ++i)
        if (gates[i] == name) return static_cast<int>(i);
    return -1;
}

int DeviceModel::require_gate(const std::string& name) const {
    const int idx = index_of(name);
    if (idx < 0) throw ConfigError("unknown gate '" + name + "'");
    return idx;
}

void DeviceModel::validate() const {
    if (gates.empty()) throw std::invalid_argument("DeviceModel: empty gate list");
    std::set<std::string> seen(gates.begin(), gates.end());
    if (seen.size() != gates.size())
        throw std::invalid_argument("DeviceModel: duplicate gate names");
    const int n = n_gates();
    if (l_delta.size() != n || l_barrier.size() != n || v0.size() != n)
        throw std::invalid_argument("DeviceModel: per-gate vectors must match gate count");
    const int i1 = require_gate("P1");
    const int i2 = require_gate("P2");
    require_gate("X1");
    if (!(l_delta(i1) > 0.0))
        throw std::invalid_argument("DeviceModel: l_delta[P1] must be positive");
    if (!(l_delta(i2) < 0.0))
        throw std::invalid_argument("DeviceModel: l_delta[P2] must be negative");
    barrier.validate();
    if (!(u > 0.0)) throw std::invalid_argument("DeviceModel: u must be positive");
    if (u_t < u) throw std::invalid_argument("DeviceModel: u_t must be >= u");
    if (!(cell_size > 0.0))
        throw std::invalid_argument("DeviceModel: cell_size must be positive");
}

std::vector<std::string> DeviceModel::default_gates() {
    return {"P1", "P2", "P3", "X1", "X2", "T1", "T2"};
}

DeviceModel DeviceModel::reference() {
    DeviceModel d;
    d.gates = default_gates();
    const int n = d.n_gates();
    d.l_delta = GateVector::Zero(n);
    d.l_barrier = GateVector::Zero(n);
    d.l_delta(d.index_of("P1")) = 0.1;
    d.l_delta(d.index_of("P2")) = -0.1;
    d.l_delta(d.index_of("X1")) = 0.01;
    d.l_barrier(d.index_of("P1")) = 0.01;
    d.l_barrier(d.index_of("P2")) = 0.01;
    d.l_barrier(d.index_of("X1")) = 0.1;
    d.barrier = WkbBarrier{5.0, 3.0, 0.05};
    d.u = 20.0;
    d.u_t = 20.0;
    d.v0 = GateVector::Zero(n);
    d.cell_size = 500.0;
    d.validate();
    return d;
}

void ControlFrame::validate() const {
    if (u_detuning.size() != u_exchange.size() || u_detuning.size() != v0.size())
        throw std::invalid_argument("ControlFrame: dimension mismatch");
    if (std::abs(u_detuning.norm() - 1.0) > 1e-9 ||
        std::abs(u_exchange.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("ControlFrame: axes must be unit vectors");
}

ControlParams control_params(const DeviceModel& d, const GateVector& v) {
    if (v.size() != d.n_gates())
        throw std::invalid_argument("control_params: gate-vector dimension mismatch");
    const GateVector dv = v - d.v0;
    ControlParams cp;
    cp.delta = d.l_delta.dot(dv);
    cp.barrier_v = d.l_barrier.dot(dv);
    cp.tc = tc_of_voltage(d.barrier, cp.barrier_v);
    return cp;
}

double exchange_of_voltages(const DeviceModel& d, const GateVector& v) {
    const ControlParams cp = control_params(d, v);
    if (std::abs(cp.delta) >= d.u)
        throw std::domain_error("exchange_of_voltages: detuning outside the (1,1) cell");
    return exchange_exact(DotPairParams(d.u, cp.tc, cp.delta));
}

GateVector grad_j(const DeviceModel& d, const GateVector& v, double step_mv) {
    const int n = d.n_gates();
    GateVector g(n);
    for (int k = 0; k < n; ++k) {
        GateVector vp = v, vm = v;
        vp(k) += step_mv;
        vm(k) -= step_mv;
        g(k) = (exchange_of_voltages(d, vp) - exchange_of_voltages(d, vm)) /
               (2.0 * step_mv);
    }
    return g;
}

double frame_lever_arm(const DeviceModel& d, const ControlFrame& f) {
    return d.l_delta.dot(f.u_detuning);
}

ControlFrame frame_from_device(const DeviceModel& d) {
    d.validate();
    const int i1 = d.index_of("P1");
    const int i2 = d.index_of("P2");
    const int ix = d.index_of("X1");
    const double g1 = d.l_delta(i1);
    const double g2 = d.l_delta(i2);
    const double gsq = g1 * g1 + g2 * g2;
    const int n = d.n_gates();

    ControlFrame f;
    f.u_detuning = GateVector::Zero(n);
    f.u_detuning(i1) = g1 / std::sqrt(gsq);
    f.u_detuning(i2) = g2 / std::sqrt(gsq);

    // The (1,1) cell center shifts along the in-plane detuning direction by
    // -l_delta[X1]/|g|^2 per mV of X1; following it keeps delta = 0.
    f.u_exchange = GateVector::Zero(n);
    const double shift = -d.l_delta(ix) / gsq;
    f.u_exchange(i1) = shift * g1;
    f.u_exchange(i2) = shift * g2;
    f.u_exchange(ix) = 1.0;
    f.u_exchange.normalize();

    f.v0 = d.v0;
    return f;
}

GateVector frame_bias(const DeviceModel& d, const ControlFrame& f, double delta,
                      double vx) {
    f.validate();
    const double alpha = frame_lever_arm(d, f);
    if (!(alpha > 0.0))
        throw NumericalError("frame_bias", "non-positive detuning lever arm");
    return f.v0 + f.u_detuning * (delta / alpha) + f.u_exchange * vx;
}

std::vector<ContourPoint> constant_j_contour(const DeviceModel& d,
                                             const ControlFrame& f,
                                             double j_target,
                                             std::span<const double> deltas,
                                             double rel_tol) {
    d.validate();
    if (!(j_target > 0.0))
        throw std::invalid_argument("constant_j_contour: j_target must be positive");
    const double lb_exch = d.l_barrier.dot(f.u_exchange);
    if (!(lb_exch > 0.0))
        throw NumericalError("constant_j_contour",
                             "exchange axis has no positive barrier response");
    const double lb_det = d.l_barrier.dot(f.u_detuning);
    const double alpha = frame_lever_arm(d, f);
    if (!(alpha > 0.0))
        throw NumericalError("constant_j_contour", "non-positive detuning lever arm");

    // Exchange-axis bracket from the barrier model: actions +/-16 put t_c at
    // its floor and its saturation value.
    const auto vx_for_action = [&](double phi, double delta) {
        const double vb = (d.barrier.a - phi) / d.barrier.b;
        return (vb - lb_det * delta / alpha) / lb_exch;
    };

    std::vector<ContourPoint> points;
    points.reserve(deltas.size());
    for (const double delta : deltas) {
        ContourPoint pt;
        pt.delta = delta;
        const auto j_at = [&](double vx) {
            return exchange_of_voltages(d, frame_bias(d, f, delta, vx));
        };
        try {
            double lo = vx_for_action(16.0, delta);
            double hi = vx_for_action(-16.0, delta);
            double j_lo = j_at(lo);
            double j_hi = j_at(hi);
            if (j_target < j_lo || j_target > j_hi) {
                pt.reachable = false;
                pt.bias = frame_bias(d, f, delta, 0.0);
                points.push_back(pt);
                continue;
            }
            double mid = 0.5 * (lo + hi);
            for (int it = 0; it < 200; ++it) {
                mid = 0.5 * (lo + hi);
                const double j_mid = j_at(mid);
                if (std::abs(j_mid - j_target) / j_target < rel_tol) break;
                if (j_mid < j_target)
                    lo = mid;
                else
                    hi = mid;
            }
            pt.vx = mid;
            pt.bias = frame_bias(d, f, delta, mid);
            pt.j = j_at(mid);
            pt.reachable = std::abs(pt.j - j_target) / j_target < rel_tol;
        } catch (const std::domain_error&) {
            pt.reachable = false;  // detuning leaves the (1,1) cell
            pt.bias = GateVector::Zero(d.n_gates());
        }
        points.push_back(pt);
    }
    return points;
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_names(const std::string& joined) {
    std::vector<std::string> out;
    std::stringstream ss(joined);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

ScanGrid synth_stability_map(const DeviceModel& d, const Axis& p1,
                             const Axis& p2, double v_x1,
                             double evolve_time_ns, int threads) {
    d.validate();
    const int i1 = d.index_of("P1");
    const int i2 = d.index_of("P2");
    const int ix = d.index_of("X1");
    const double g1 = d.l_delta(i1);
    const double g2 = d.l_delta(i2);
    const double gn = std::sqrt(g1 * g1 + g2 * g2);

    ScanGrid grid;
    grid.x = p1;
    grid.y = p2;
    grid.data.assign(p1.size() * p2.size(), 0.0);

    const std::size_t nx = p1.size();
    parallel_for(
        p2.size(),
        [&](std::size_t iy) {
            GateVector v = d.v0;
            v(ix) = v_x1;
            for (std::size_t jx = 0; jx < nx; ++jx) {
                v(i1) = p1.values[jx];
                v(i2) = p2.values[iy];
                const ControlParams cp = control_params(d, v);
                // Displacement along the charge boundaries (perpendicular to
                // the in-plane detuning direction).
                const double s = (-g2 * (v(i1) - d.v0(i1)) +
                                  g1 * (v(i2) - d.v0(i2))) /
                                 gn;
                double p;
                if (std::abs(cp.delta) >= d.u || std::abs(s) > 0.5 * d.cell_size) {
                    p = 1.0;  // readout saturates past a charge transition
                } else {
                    const double j =
                        exchange_exact(DotPairParams(d.u, cp.tc, cp.delta));
                    p = 1.0 - 0.375 * (1.0 - std::cos(2.0 * M_PI * j *
                                                      evolve_time_ns));
                }
                grid.data[iy * nx + jx] = p;
            }
        },
        threads);

    grid.meta.scalars["v_x1"] = v_x1;
    grid.meta.scalars["evolve_time_ns"] = evolve_time_ns;
    grid.meta.strings["gates"] = join_names(d.gates);
    GateVector base = d.v0;
    base(ix) = v_x1;
    grid.meta.vectors["base_bias"] =
        std::vector<double>(base.data(), base.data() + base.size());
    return grid;
}

namespace {

constexpr double kSatTol = 1e-9;

struct CellDetection {
    double cx = 0.0;  // centroid, x-axis units (P1)
    double cy = 0.0;  // centroid, y-axis units (P2)
    std::vector<std::pair<double, double>> edge_points;  // charge-boundary pixels
};

CellDetection detect_cell(const ScanGrid& g) {
    const std::size_t nx = g.x.size();
    const std::size_t ny = g.y.size();
    if (nx < 8 || ny < 8)
        throw CalibrationError("calibrate_axes", "map too small");

    const double b_val = *std::max_element(g.data.begin(), g.data.end());

    double interior_sum = 0.0;
    std::size_t interior_count = 0;
    for (const double v : g.data) {
        if (v < b_val - kSatTol) {
            interior_sum += v;
            ++interior_count;
        }
    }
    if (interior_count == 0)
        throw CalibrationError("calibrate_axes", "no interior pixels (cell not found)");
    const double thr = 0.5 * (interior_sum / interior_count + b_val);

    // Centroid of the sub-threshold pixels. Fringes are symmetric about the
    // cell center, so the partial mask still centers correctly.
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    bool touches_border = false;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t jx = 0; jx < nx; ++jx) {
            if (g.at(iy, jx) < thr) {
                sx += g.x.values[jx];
                sy += g.y.values[iy];
                ++count;
                if (iy == 0 || jx == 0 || iy == ny - 1 || jx == nx - 1)
                    touches_border = true;
            }
        }
    }
    if (count < 16)
        throw CalibrationError("calibrate_axes", "cell not found (threshold mask empty)");
    if (touches_border)
        throw CalibrationError("calibrate_axes", "cell is not closed inside the scan window");

    CellDetection det;
    det.cx = sx / static_cast<double>(count);
    det.cy = sy / static_cast<double>(count);

    // Exterior saturated region, flood-filled from the map border.
    std::vector<char> exterior(nx * ny, 0);
    std::deque<std::pair<std::size_t, std::size_t>> queue;
    const auto try_push = [&](std::size_t iy, std::size_t jx) {
        const std::size_t idx = iy * nx + jx;
        if (!exterior[idx] && g.data[idx] >= b_val - kSatTol) {
            exterior[idx] = 1;
            queue.emplace_back(iy, jx);
        }
    };
    for (std::size_t jx = 0; jx < nx; ++jx) {
        try_push(0, jx);
        try_push(ny - 1, jx);
    }
    for (std::size_t iy = 0; iy < ny; ++iy) {
        try_push(iy, 0);
        try_push(iy, nx - 1);
    }
    while (!queue.empty()) {
        const auto [iy, jx] = queue.front();
        queue.pop_front();
        if (iy > 0) try_push(iy - 1, jx);
        if (iy + 1 < ny) try_push(iy + 1, jx);
        if (jx > 0) try_push(iy, jx - 1);
        if (jx + 1 < nx) try_push(iy, jx + 1);
    }

    // Boundary pixels: exterior cells adjacent to the cell. Classified into
    // the two detuning boundaries with the nominal axis prior (valid for
    // cross-capacitance well below unity).
    std::vector<std::pair<double, double>> edges;
    for (std::size_t iy = 1; iy + 1 < ny; ++iy) {
        for (std::size_t jx = 1; jx + 1 < nx; ++jx) {
            if (!exterior[iy * nx + jx]) continue;
            const bool inner_neighbor =
                !exterior[(iy - 1) * nx + jx] || !exterior[(iy + 1) * nx + jx] ||
                !exterior[iy * nx + jx - 1] || !exterior[iy * nx + jx + 1];
            if (inner_neighbor)
                edges.emplace_back(g.x.values[jx], g.y.values[iy]);
        }
    }
    if (edges.size() < 32)
        throw CalibrationError("calibrate_axes", "no closed charge boundary detected");
    det.edge_points = std::move(edges);
    return det;
}

Eigen::Vector2d principal_direction(
    const std::vector<std::pair<double, double>>& pts) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& [x, y] : pts) {
        const double dx = x - mx, dy = y - my;
        cov(0, 0) += dx * dx;
        cov(0, 1) += dx * dy;
        cov(1, 1) += dy * dy;
    }
    cov(1, 0) = cov(0, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    return es.eigenvectors().col(1);  // largest eigenvalue
}

}  // namespace

ControlFrame calibrate_axes(const ScanGrid& map_lo, const ScanGrid& map_hi) {
    const auto get_x1 = [](const ScanGrid& g) {
        auto it = g.meta.scalars.find("v_x1");
        if (it == g.meta.scalars.end())
            throw CalibrationError("calibrate_axes", "map lacks v_x1 metadata");
        return it->second;
    };
    const double x1_lo = get_x1(map_lo);
    const double x1_hi = get_x1(map_hi);
    if (std::abs(x1_hi - x1_lo) < 1e-12)
        throw CalibrationError("calibrate_axes", "maps taken at the same exchange bias");

    const auto gates_it = map_lo.meta.strings.find("gates");
    const auto base_it = map_lo.meta.vectors.find("base_bias");
    if (gates_it == map_lo.meta.strings.end() || base_it == map_lo.meta.vectors.end())
        throw CalibrationError("calibrate_axes", "map lacks gate metadata");
    const std::vector<std::string> gates = split_names(gates_it->second);
    const int n = static_cast<int>(gates.size());
    const auto index_of = [&](const std::string& name) {
        for (int i = 0; i < n; ++i)
            if (gates[i] == name) return i;
        throw CalibrationError("calibrate_axes", "map lacks gate '" + name + "'");
    };
    const int i1 = index_of("P1");
    const int i2 = index_of("P2");
    const int ix = index_of("X1");

    const CellDetection lo = detect_cell(map_lo);
    const CellDetection hi = detect_cell(map_hi);

    // Split the boundary pixels into the two detuning edges: far out along
    // the nominal detuning direction, away from the cell ends.
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<std::pair<double, double>> pos, neg;
    double umax = 0.0, wmax = 0.0;
    std::vector<std::pair<double, double>> uw(lo.edge_points.size());
    for (std::size_t k = 0; k < lo.edge_points.size(); ++k) {
        const double rx = lo.edge_points[k].first - lo.cx;
        const double ry = lo.edge_points[k].second - lo.cy;
        const double u = (rx - ry) * inv_sqrt2;
        const double w = (rx + ry) * inv_sqrt2;
        uw[k] = {u, w};
        umax = std::max(umax, std::abs(u));
        wmax = std::max(wmax, std::abs(w));
    }
    for (std::size_t k = 0; k < lo.edge_points.size(); ++k) {
        const auto [u, w] = uw[k];
        if (std::abs(w) > 0.75 * wmax) continue;
        if (u > 0.55 * umax)
            pos.push_back(lo.edge_points[k]);
        else if (u < -0.55 * umax)
            neg.push_back(lo.edge_points[k]);
    }
    if (pos.size() < 8 || neg.size() < 8)
        throw CalibrationError("calibrate_axes", "charge boundaries not resolved");

    Eigen::Vector2d dir_pos = principal_direction(pos);
    Eigen::Vector2d dir_neg = principal_direction(neg);
    const Eigen::Vector2d d2(inv_sqrt2, inv_sqrt2);
    if (dir_pos.dot(d2) < 0) dir_pos = -dir_pos;
    if (dir_neg.dot(d2) < 0) dir_neg = -dir_neg;
    Eigen::Vector2d boundary = (dir_pos + dir_neg).normalized();

    Eigen::Vector2d det_inplane(boundary.y(), -boundary.x());
    if (det_inplane.x() - det_inplane.y() < 0) det_inplane = -det_inplane;

    ControlFrame f;
    f.u_detuning = GateVector::Zero(n);
    f.u_detuning(i1) = det_inplane.x();
    f.u_detuning(i2) = det_inplane.y();

    f.u_exchange = GateVector::Zero(n);
    f.u_exchange(i1) = hi.cx - lo.cx;
    f.u_exchange(i2) = hi.cy - lo.cy;
    f.u_exchange(ix) = x1_hi - x1_lo;
    f.u_exchange.normalize();
    if (f.u_exchange(ix) < 0) f.u_exchange = -f.u_exchange;

    f.v0 = Eigen::Map<const GateVector>(base_it->second.data(),
                                        static_cast<int>(base_it->second.size()));
    if (f.v0.size() != n)
        throw CalibrationError("calibrate_axes", "base bias metadata dimension mismatch");
    f.v0(i1) = lo.cx;
    f.v0(i2) = lo.cy;
    f.validate();
    return f;
}

}

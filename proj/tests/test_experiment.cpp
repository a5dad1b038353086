#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dotsim/errors.hpp"
#include "dotsim/experiment.hpp"
#include "dotsim/hubbard.hpp"
#include "dotsim/rng.hpp"

using namespace dotsim;

namespace {

const DeviceModel& ref_device() {
    static const DeviceModel d = DeviceModel::reference();
    return d;
}

GateVector sop_bias(double j_target = 0.16) {
    const DeviceModel& d = ref_device();
    const ControlFrame f = frame_from_device(d);
    const std::vector<double> zero{0.0};
    return constant_j_contour(d, f, j_target, zero)[0].bias;
}

TimeTrace synth_trace(double j, double tau1, double tau2, double t_max,
                      std::size_t n) {
    TimeTrace tr;
    tr.times = make_time_grid(t_max, n);
    tr.p_singlet.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = tr.times[i];
        double env = std::exp(-(t / tau1) * (t / tau1));
        if (tau2 > 0.0) env *= std::exp(-(t / tau2) * (t / tau2));
        tr.p_singlet[i] =
            1.0 - 0.375 * (1.0 - env * std::cos(2.0 * M_PI * j * t));
    }
    return tr;
}

int count_resolved_extrema(const std::vector<double>& row, double baseline,
                           double threshold) {
    int count = 0;
    for (std::size_t i = 1; i + 1 < row.size(); ++i) {
        const bool is_max = row[i] > row[i - 1] && row[i] >= row[i + 1];
        const bool is_min = row[i] < row[i - 1] && row[i] <= row[i + 1];
        if ((is_max || is_min) && std::abs(row[i] - baseline) > threshold)
            ++count;
    }
    return count;
}

}  // namespace

TEST_CASE("noiseless rabi trace oscillates over the full contrast") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias();
    const auto times = make_time_grid(200.0, 3201);
    const TimeTrace tr = rabi_trace(d, v, times, std::nullopt, {}, {});

    CHECK(tr.p_singlet.front() == doctest::Approx(1.0).epsilon(1e-12));
    const auto [lo, hi] =
        std::minmax_element(tr.p_singlet.begin(), tr.p_singlet.end());
    CHECK(*lo == doctest::Approx(0.25).epsilon(5e-4));
    CHECK(*hi == doctest::Approx(1.0).epsilon(1e-6));
    for (const double p : tr.p_singlet) {
        CHECK(p >= 0.25 - 1e-9);
        CHECK(p <= 1.0 + 1e-9);
    }
}

TEST_CASE("monte-carlo envelope matches the analytic quasi-static envelope") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias();
    const NoiseModel noise = NoiseModel::one_over_f(0.3, 1.0);
    const GateCorrelation corr = GateCorrelation::identity(d.n_gates());

    // 1/e time ~ 230 ns at this bias; span twice that.
    const auto times = make_time_grid(470.0, 901);
    RabiOptions mc;
    mc.mode = RabiMode::monte_carlo;
    mc.seed = 42;
    mc.n_samples = 2000;
    const TimeTrace sim = rabi_trace(d, v, times, noise, corr, mc);
    const TimeTrace ana = rabi_trace(d, v, times, noise, corr, {});

    double max_diff = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(sim.p_singlet[i] - ana.p_singlet[i]));
    CHECK(max_diff < 0.02);
}

TEST_CASE("monte-carlo traces are seed-reproducible") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias();
    const NoiseModel noise = NoiseModel::one_over_f(0.3, 1.0);
    const auto times = make_time_grid(300.0, 301);
    RabiOptions mc;
    mc.mode = RabiMode::monte_carlo;
    mc.seed = 7;
    mc.n_samples = 300;

    const TimeTrace a = rabi_trace(d, v, times, noise, {}, mc);
    const TimeTrace b = rabi_trace(d, v, times, noise, {}, mc);
    CHECK(a.p_singlet == b.p_singlet);

    mc.seed = 8;
    const TimeTrace c = rabi_trace(d, v, times, noise, {}, mc);
    CHECK(a.p_singlet != c.p_singlet);

    // Doubling the sample count moves the mean by no more than the
    // statistical scale.
    mc.seed = 7;
    mc.n_samples = 600;
    const TimeTrace dbl = rabi_trace(d, v, times, noise, {}, mc);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(dbl.p_singlet[i] - a.p_singlet[i]));
    CHECK(max_diff < 5.0 * 0.375 / std::sqrt(300.0));
}

TEST_CASE("fit_rabi recovers frequency and decay from a clean trace") {
    const TimeTrace tr = synth_trace(0.1, 500.0, 0.0, 1200.0, 1601);
    const RabiFit fit = fit_rabi(tr);
    CHECK(fit.converged);
    CHECK(std::abs(fit.frequency - 0.1) / 0.1 < 0.005);
    CHECK(std::abs(fit.decay_1e - 500.0) / 500.0 < 0.02);
    CHECK(fit.n_rabi == doctest::Approx(fit.frequency * fit.decay_1e));
}

TEST_CASE("composite decay splits into its two channels with one pinned") {
    const TimeTrace tr = synth_trace(0.05, 1000.0, 1500.0, 2500.0, 2501);

    // Single-Gaussian fit sees only the combined time.
    const double tau_tot =
        1.0 / std::sqrt(1.0 / (1000.0 * 1000.0) + 1.0 / (1500.0 * 1500.0));
    const RabiFit combined = fit_rabi(tr);
    CHECK(std::abs(combined.decay_1e - tau_tot) / tau_tot < 0.02);

    // Pinning either channel recovers the other.
    const RabiFit charge = fit_rabi_two_gaussian(tr, 1000.0);
    CHECK(std::abs(charge.decay_1e - 1500.0) / 1500.0 < 0.05);
    const RabiFit hf = fit_rabi_two_gaussian(tr, 1500.0);
    CHECK(std::abs(hf.decay_1e - 1000.0) / 1000.0 < 0.05);
}

TEST_CASE("fit_rabi rejects degenerate input") {
    TimeTrace flat;
    flat.times = make_time_grid(1000.0, 501);
    flat.p_singlet.assign(501, 0.625);
    CHECK_THROWS_AS(fit_rabi(flat), FitError);

    // Too few periods in the window.
    const TimeTrace few = synth_trace(0.004, 1e6, 0.0, 1000.0, 801);
    CHECK_THROWS_AS(fit_rabi(few), std::invalid_argument);

    // Too few samples per period.
    const TimeTrace sparse = synth_trace(0.2, 1e6, 0.0, 1000.0, 801);
    CHECK_THROWS_AS(fit_rabi(sparse), std::invalid_argument);
}

TEST_CASE("fit_rabi with a high-pass filter strips slow baseline drift") {
    TimeTrace tr = synth_trace(0.1, 600.0, 0.0, 1200.0, 1601);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        tr.p_singlet[i] += 0.08 * std::sin(2.0 * M_PI * 0.002 * tr.times[i]);
    const RabiFit fit = fit_rabi(tr, 0.02);
    CHECK(std::abs(fit.frequency - 0.1) / 0.1 < 0.005);
}

TEST_CASE("two-frequency mixture") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias(0.05);
    const auto times = make_time_grid(2000.0, 2001);

    TwoFreqOptions pure;
    pure.weight = 1.0;
    pure.j2_offset = 0.01;
    const TimeTrace one = two_freq_trace(d, v, times, pure, std::nullopt, {}, {});
    const TimeTrace direct = rabi_trace(d, v, times, std::nullopt, {}, {});
    CHECK(one.p_singlet == direct.p_singlet);

    TwoFreqOptions mix;
    mix.weight = 0.5;
    mix.j2_offset = 0.01;
    const TimeTrace two = two_freq_trace(d, v, times, mix, std::nullopt, {}, {});

    // Pointwise convexity between the two channels.
    TwoFreqOptions other;
    other.weight = 0.0;
    other.j2_offset = 0.01;
    const TimeTrace ch2 = two_freq_trace(d, v, times, other, std::nullopt, {}, {});
    for (std::size_t i = 0; i < times.size(); i += 50) {
        const double lo = std::min(direct.p_singlet[i], ch2.p_singlet[i]);
        const double hi = std::max(direct.p_singlet[i], ch2.p_singlet[i]);
        CHECK(two.p_singlet[i] >= lo - 1e-12);
        CHECK(two.p_singlet[i] <= hi + 1e-12);
    }
}

TEST_CASE("spectrum peaks") {
    // Single tone at 0.1 GHz over 2000 ns.
    const TimeTrace tr = synth_trace(0.1, 1e9, 0.0, 2000.0, 2001);
    const Spectrum spec = fft_spectrum(tr);
    const auto peaks = peak_frequencies(spec, 1);
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0] - 0.1) < 1.0 / 2048.0);

    // Two-tone mixture: both channels recovered within a bin.
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias(0.05);
    const double j1 = exchange_of_voltages(d, v);
    TwoFreqOptions mix;
    mix.weight = 0.5;
    mix.j2_offset = 0.06 - j1;
    const auto times = make_time_grid(2000.0, 2001);
    const TimeTrace two = two_freq_trace(d, v, times, mix, std::nullopt, {}, {});
    auto two_peaks = peak_frequencies(fft_spectrum(two), 2);
    REQUIRE(two_peaks.size() == 2);
    std::sort(two_peaks.begin(), two_peaks.end());
    CHECK(std::abs(two_peaks[0] - j1) < 1.0 / 2048.0);
    CHECK(std::abs(two_peaks[1] - 0.06) < 1.0 / 2048.0);

    // Constant trace: nothing above the floor.
    TimeTrace flat;
    flat.times = make_time_grid(1000.0, 257);
    flat.p_singlet.assign(257, 0.625);
    CHECK(peak_frequencies(fft_spectrum(flat), 3).empty());
}

TEST_CASE("chevron scan") {
    const DeviceModel& d = ref_device();
    const ControlFrame f = frame_from_device(d);
    const NoiseModel noise = NoiseModel::one_over_f(0.3, 1.0);
    const Axis deltas = linspace_axis("delta", "GHz", -14.0, 14.0, 15);
    const Axis times = linspace_axis("time", "ns", 0.0, 250.0, 1001);
    const ScanGrid grid =
        chevron_scan(d, f, deltas, times, 479.0, noise, {}, {});

    // Symmetric under detuning reversal.
    for (std::size_t k = 0; k < 7; ++k)
        for (std::size_t j = 0; j < times.size(); j += 25)
            CHECK(grid.at(k, j) == doctest::Approx(grid.at(14 - k, j)).epsilon(1e-9));

    // The central row oscillates slowest and keeps the most resolvable fringes.
    std::vector<std::vector<double>> rows(deltas.size());
    for (std::size_t k = 0; k < deltas.size(); ++k)
        rows[k] = {grid.data.begin() + k * times.size(),
                   grid.data.begin() + (k + 1) * times.size()};
    TimeTrace center;
    center.times = times.values;
    center.p_singlet = rows[7];
    TimeTrace edge;
    edge.times = times.values;
    edge.p_singlet = rows[0];
    const double f_center = peak_frequencies(fft_spectrum(center), 1).at(0);
    const double f_edge = peak_frequencies(fft_spectrum(edge), 1).at(0);
    CHECK(f_center < f_edge);

    int max_count = -1;
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        const int c = count_resolved_extrema(rows[k], 1.0 - 0.375, 0.05);
        if (c > max_count) {
            max_count = c;
            argmax = k;
        }
    }
    CHECK(argmax == 7);
}

TEST_CASE("fingerprint scan") {
    const DeviceModel& d = ref_device();
    const ControlFrame f = frame_from_device(d);
    const Axis deltas = linspace_axis("delta", "GHz", -14.0, 14.0, 29);
    const Axis vxs = linspace_axis("vx", "mV", 150.0, 400.0, 121);
    const ScanGrid grid = fingerprint_scan(d, f, deltas, vxs, 500.0);

    // Rows mirror in detuning, so every vertical cut has an extremum at
    // delta = 0.
    for (std::size_t jx = 0; jx < vxs.size(); jx += 10)
        CHECK(grid.at(13, jx) == doctest::Approx(grid.at(15, jx)).epsilon(1e-9));

    // Fringes densify with exchange bias: count extrema along the central row.
    const std::vector<double> center_row(grid.data.begin() + 14 * vxs.size(),
                                         grid.data.begin() + 15 * vxs.size());
    const std::vector<double> low_half(center_row.begin(),
                                       center_row.begin() + 60);
    const std::vector<double> high_half(center_row.begin() + 60,
                                        center_row.end());
    CHECK(count_resolved_extrema(high_half, 0.625, 0.02) >
          count_resolved_extrema(low_half, 0.625, 0.02));

    // A faint second frequency adds weak extra fringes.
    TwoFreqOptions tf;
    tf.weight = 0.85;
    tf.j2_scale = 1.2;
    const ScanGrid faint = fingerprint_scan(d, f, deltas, vxs, 500.0,
                                            std::nullopt, {}, tf);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < faint.data.size(); ++i)
        max_diff = std::max(max_diff, std::abs(faint.data[i] - grid.data[i]));
    CHECK(max_diff > 0.01);
    CHECK(max_diff < 0.3);
}

TEST_CASE("measured insensitivity matches the direct gradient") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias();
    const InsensitivityEstimate est = measured_insensitivity(d, v);
    const double direct = insensitivity(exchange_of_voltages(d, v), grad_j(d, v));
    CHECK(std::abs(est.insens - direct) / direct < 0.02);

    // Step-size robustness.
    const InsensitivityEstimate half = measured_insensitivity(d, v, 0.25);
    CHECK(std::abs(half.insens - est.insens) / est.insens < 0.01);
}

TEST_CASE("i-vs-j sweep rises along the symmetric axis") {
    const DeviceModel& d = ref_device();
    const ControlFrame f = frame_from_device(d);
    const Axis vxs = linspace_axis("vx", "mV", 400.0, 700.0, 16);
    const auto rows = i_vs_j_sweep(d, f, vxs);
    REQUIRE(rows.size() == 16);
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        CHECK(rows[k + 1].j > rows[k].j);
        CHECK(rows[k + 1].insens > rows[k].insens);
    }
}

TEST_CASE("contour sweep composes the protocol pieces") {
    const DeviceModel& d = ref_device();
    const ControlFrame f = frame_from_device(d);
    const NoiseModel noise = NoiseModel::one_over_f(0.3, 1.0);
    const std::vector<double> deltas{-12.0, 0.0, 12.0};
    ContourSweepOptions opts;
    opts.seed = 5;
    opts.n_samples = 500;
    const auto rows = insensitivity_contour_sweep(
        d, f, 0.16, deltas, noise, GateCorrelation::identity(d.n_gates()), opts);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].i_meas > rows[0].i_meas);
    CHECK(rows[1].i_meas > rows[2].i_meas);
    for (const auto& r : rows) {
        REQUIRE(r.reachable);
        CHECK(std::abs(r.n_sim - r.n_pred) / r.n_pred < 0.25);
    }
}

TEST_CASE("readout sampling is deterministic and bounded") {
    const DeviceModel& d = ref_device();
    const GateVector v = sop_bias();
    const auto times = make_time_grid(100.0, 161);
    RabiOptions opts;
    opts.readout_shots = 200;
    opts.seed = 3;
    const TimeTrace a = rabi_trace(d, v, times, std::nullopt, {}, opts);
    const TimeTrace b = rabi_trace(d, v, times, std::nullopt, {}, opts);
    CHECK(a.p_singlet == b.p_singlet);
    for (const double p : a.p_singlet) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

#include "dotsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "dotsim/errors.hpp"
#include "dotsim/hubbard.hpp"
#include "dotsim/parallel.hpp"
#include "dotsim/rng.hpp"

namespace dotsim {

namespace {

constexpr uint64_t kReadoutSalt = 0x726561646f7574ULL;

double check_uniform_dt(std::span<const double> times) {
    if (times.size() < 2)
        throw std::invalid_argument("time grid needs at least 2 points");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw std::invalid_argument("time grid must be increasing");
    for (std::size_t i = 1; i + 1 < times.size(); ++i)
        if (std::abs(times[i + 1] - times[i] - dt) > 1e-9 * std::max(1.0, dt))
            throw std::invalid_argument("time grid must be uniform");
    return dt;
}

/// Square root factor of the correlation matrix used to draw correlated
/// offsets; diagonal weights avoid the decomposition entirely.
struct NoiseShaper {
    Eigen::VectorXd diag;   // per-gate std scale, used when chol is empty
    Eigen::MatrixXd chol;

    static NoiseShaper build(const GateCorrelation& corr, int n) {
        NoiseShaper s;
        if (corr.full.size() > 0) {
            const Eigen::MatrixXd c = corr.matrix_for(n);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
            const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
            s.chol = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
        } else if (corr.weights.size() > 0) {
            if (corr.weights.size() != n)
                throw std::invalid_argument("GateCorrelation: weight dimension mismatch");
            s.diag = corr.weights;
        } else {
            s.diag = Eigen::VectorXd::Ones(n);
        }
        return s;
    }

    Eigen::VectorXd draw(Rng& rng, double scale) const {
        if (chol.size() > 0) {
            Eigen::VectorXd z(chol.rows());
            for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
            return scale * (chol * z);
        }
        Eigen::VectorXd v(diag.size());
        for (int i = 0; i < v.size(); ++i) v(i) = scale * diag(i) * rng.normal();
        return v;
    }
};

void apply_readout(std::vector<double>& p, int shots, uint64_t seed) {
    if (shots <= 0) return;
    for (std::size_t i = 0; i < p.size(); ++i) {
        Rng rng = Rng::stream(seed ^ kReadoutSalt, i);
        int count = 0;
        for (int s = 0; s < shots; ++s)
            if (rng.uniform() < p[i]) ++count;
        p[i] = static_cast<double>(count) / shots;
    }
}

struct TraceChannel {
    GateVector bias;
    double j_scale = 1.0;
    double j_offset = 0.0;
};

/// One oscillation channel, either with the analytic quasi-static envelope or
/// as a Monte-Carlo average over per-trajectory voltage offsets. The offsets
/// carry the full static variance 2 sigma_V^2 C: the filtered variance
/// sigma_V^2 is half the static variance for a square pulse in the
/// quasi-static limit, which makes the averaged decay reproduce
/// exp[-(2 pi J t)^2 (sigma_V / I)^2] and the fringe count I/(2 pi sigma_V).
std::vector<double> trace_channel(const DeviceModel& d, const TraceChannel& ch,
                                  std::span<const double> times,
                                  const std::optional<NoiseModel>& noise,
                                  const GateCorrelation& corr,
                                  const RabiOptions& opts, uint64_t traj_salt) {
    const double j0 =
        ch.j_scale * exchange_of_voltages(d, ch.bias) + ch.j_offset;
    const std::size_t nt = times.size();
    std::vector<double> p(nt);
    const double half_c = 0.5 * opts.contrast;

    if (opts.mode == RabiMode::analytic) {
        double q = 0.0;  // grad^T C grad of this channel's J, GHz^2/mV^2
        if (noise) {
            const GateVector g = ch.j_scale * grad_j(d, ch.bias);
            q = g.dot(corr.matrix_for(d.n_gates()) * g);
        }
        parallel_for(
            nt,
            [&](std::size_t i) {
                const double t = times[i];
                double env = hyperfine_envelope(t, opts.t_hf_ns);
                if (noise && t > 0.0 && q > 0.0) {
                    const double sig = sigma_v_effective(*noise, t);
                    const double x = 2.0 * M_PI * t * sig;
                    env *= std::exp(-x * x * q);
                }
                p[i] = 1.0 - half_c * (1.0 - env * std::cos(2.0 * M_PI * j0 * t));
            },
            opts.threads);
        return p;
    }

    // Monte-Carlo: one frozen offset per trajectory, J re-evaluated exactly.
    if (opts.n_samples < 1)
        throw std::invalid_argument("rabi_trace: n_samples must be >= 1");
    std::vector<double> j_samples(opts.n_samples, j0);
    if (noise) {
        const double sigma = sigma_v_effective(*noise, times.back());
        const NoiseShaper shaper = NoiseShaper::build(corr, d.n_gates());
        const double scale = std::sqrt(2.0) * sigma;
        parallel_for(
            opts.n_samples,
            [&](std::size_t i) {
                Rng rng = Rng::stream(opts.seed, traj_salt + i);
                const GateVector dv = shaper.draw(rng, scale);
                j_samples[i] =
                    ch.j_scale * exchange_of_voltages(d, ch.bias + dv) +
                    ch.j_offset;
            },
            opts.threads);
    }
    parallel_for(
        nt,
        [&](std::size_t i) {
            const double t = times[i];
            double mean_cos = 0.0;
            for (const double j : j_samples)
                mean_cos += std::cos(2.0 * M_PI * j * t);
            mean_cos /= static_cast<double>(j_samples.size());
            const double env = hyperfine_envelope(t, opts.t_hf_ns);
            p[i] = 1.0 - half_c * (1.0 - env * mean_cos);
        },
        opts.threads);
    return p;
}

void validate_rabi_inputs(std::span<const double> times,
                          const RabiOptions& opts) {
    if (times.empty()) throw std::invalid_argument("rabi_trace: empty time grid");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("rabi_trace: times must be strictly increasing");
    if (!(opts.contrast > 0.0) || opts.contrast > 1.0)
        throw std::invalid_argument("rabi_trace: contrast must be in (0, 1]");
}

Metadata trace_meta(const GateVector& bias, double j, const RabiOptions& opts) {
    Metadata m;
    m.scalars["j_ghz"] = j;
    m.scalars["seed"] = static_cast<double>(opts.seed);
    m.scalars["monte_carlo"] = opts.mode == RabiMode::monte_carlo ? 1.0 : 0.0;
    if (std::isfinite(opts.t_hf_ns)) m.scalars["t_hf_ns"] = opts.t_hf_ns;
    m.vectors["bias_mv"] =
        std::vector<double>(bias.data(), bias.data() + bias.size());
    return m;
}

}  // namespace

std::vector<double> make_time_grid(double t_max_ns, std::size_t n_points) {
    if (n_points < 2 || !(t_max_ns > 0.0))
        throw std::invalid_argument("make_time_grid: bad arguments");
    std::vector<double> t(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        t[i] = t_max_ns * static_cast<double>(i) / static_cast<double>(n_points - 1);
    return t;
}

TimeTrace rabi_trace(const DeviceModel& d, const GateVector& v,
                     std::span<const double> times,
                     const std::optional<NoiseModel>& noise,
                     const GateCorrelation& corr, const RabiOptions& opts) {
    validate_rabi_inputs(times, opts);
    TraceChannel ch;
    ch.bias = v;
    TimeTrace out;
    out.times.assign(times.begin(), times.end());
    out.p_singlet = trace_channel(d, ch, times, noise, corr, opts, 0);
    apply_readout(out.p_singlet, opts.readout_shots, opts.seed);
    out.meta = trace_meta(v, exchange_of_voltages(d, v), opts);
    return out;
}

TimeTrace two_freq_trace(const DeviceModel& d, const GateVector& v,
                         std::span<const double> times, const TwoFreqOptions& tf,
                         const std::optional<NoiseModel>& noise,
                         const GateCorrelation& corr, const RabiOptions& opts) {
    validate_rabi_inputs(times, opts);
    if (tf.weight < 0.0 || tf.weight > 1.0)
        throw std::invalid_argument("two_freq_trace: weight must be in [0, 1]");
    TraceChannel ch1;
    ch1.bias = v;
    TraceChannel ch2;
    ch2.bias = tf.second_bias ? *tf.second_bias : v;
    if (!tf.second_bias) {
        ch2.j_scale = tf.j2_scale;
        ch2.j_offset = tf.j2_offset;
    }

    TimeTrace out;
    out.times.assign(times.begin(), times.end());
    const auto p1 = trace_channel(d, ch1, times, noise, corr, opts, 0);
    const auto p2 = trace_channel(d, ch2, times, noise, corr, opts, 0);
    out.p_singlet.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        out.p_singlet[i] = tf.weight * p1[i] + (1.0 - tf.weight) * p2[i];
    apply_readout(out.p_singlet, opts.readout_shots, opts.seed);
    out.meta = trace_meta(v, exchange_of_voltages(d, v), opts);
    out.meta.scalars["two_freq_weight"] = tf.weight;
    return out;
}

ScanGrid chevron_scan(const DeviceModel& d, const ControlFrame& f,
                      const Axis& delta_axis, const Axis& time_axis, double vx,
                      const std::optional<NoiseModel>& noise,
                      const GateCorrelation& corr, const RabiOptions& opts) {
    ScanGrid grid;
    grid.x = time_axis;
    grid.y = delta_axis;
    grid.data.assign(time_axis.size() * delta_axis.size(), 0.0);
    const std::size_t nx = time_axis.size();
    for (std::size_t iy = 0; iy < delta_axis.size(); ++iy) {
        TraceChannel ch;
        ch.bias = frame_bias(d, f, delta_axis.values[iy], vx);
        const auto row =
            trace_channel(d, ch, time_axis.values, noise, corr, opts,
                          iy * static_cast<uint64_t>(std::max(opts.n_samples, 1)));
        std::copy(row.begin(), row.end(), grid.data.begin() + iy * nx);
    }
    apply_readout(grid.data, opts.readout_shots, opts.seed);
    grid.meta.scalars["vx"] = vx;
    grid.meta.scalars["seed"] = static_cast<double>(opts.seed);
    return grid;
}

ScanGrid fingerprint_scan(const DeviceModel& d, const ControlFrame& f,
                          const Axis& delta_axis, const Axis& vx_axis,
                          double evolve_time_ns,
                          const std::optional<NoiseModel>& noise,
                          const GateCorrelation& corr, const TwoFreqOptions& tf,
                          const RabiOptions& opts) {
    if (tf.weight < 0.0 || tf.weight > 1.0)
        throw std::invalid_argument("fingerprint_scan: weight must be in [0, 1]");
    ScanGrid grid;
    grid.x = vx_axis;
    grid.y = delta_axis;
    grid.data.assign(vx_axis.size() * delta_axis.size(), 0.0);
    const std::size_t nx = vx_axis.size();
    const double sigma =
        noise ? sigma_v_effective(*noise, evolve_time_ns) : 0.0;
    const Eigen::MatrixXd cmat = corr.matrix_for(d.n_gates());
    const double half_c = 0.5 * opts.contrast;
    const double t = evolve_time_ns;
    const double g_hf = hyperfine_envelope(t, opts.t_hf_ns);

    parallel_for(
        delta_axis.size(),
        [&](std::size_t iy) {
            for (std::size_t jx = 0; jx < nx; ++jx) {
                const GateVector bias = frame_bias(
                    d, f, delta_axis.values[iy], vx_axis.values[jx]);
                const double j = exchange_of_voltages(d, bias);
                double q = 0.0;
                if (noise) {
                    const GateVector g = grad_j(d, bias);
                    q = g.dot(cmat * g);
                }
                const auto channel = [&](double j_ch, double q_ch) {
                    double env = g_hf;
                    if (noise && q_ch > 0.0) {
                        const double x = 2.0 * M_PI * t * sigma;
                        env *= std::exp(-x * x * q_ch);
                    }
                    return 1.0 -
                           half_c * (1.0 - env * std::cos(2.0 * M_PI * j_ch * t));
                };
                double p = channel(j, q);
                if (tf.weight < 1.0) {
                    const double j2 = tf.j2_scale * j + tf.j2_offset;
                    const double q2 = tf.j2_scale * tf.j2_scale * q;
                    p = tf.weight * p + (1.0 - tf.weight) * channel(j2, q2);
                }
                grid.data[iy * nx + jx] = p;
            }
        },
        opts.threads);

    grid.meta.scalars["evolve_time_ns"] = evolve_time_ns;
    return grid;
}

namespace {

void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

Spectrum spectrum_of(std::span<const double> times,
                     std::span<const double> values) {
    const double dt = check_uniform_dt(times);
    const std::size_t n = values.size();
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);

    std::size_t n_pad = 1;
    while (n_pad < n) n_pad <<= 1;
    std::vector<std::complex<double>> buf(n_pad, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w =
            0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                  static_cast<double>(n - 1)));
        buf[i] = (values[i] - mean) * w;
    }
    fft_inplace(buf);

    Spectrum s;
    const double df = 1.0 / (static_cast<double>(n_pad) * dt);
    s.frequency.resize(n_pad / 2 + 1);
    s.magnitude.resize(n_pad / 2 + 1);
    for (std::size_t k = 0; k <= n_pad / 2; ++k) {
        s.frequency[k] = df * static_cast<double>(k);
        s.magnitude[k] = std::abs(buf[k]);
    }
    return s;
}

}  // namespace

Spectrum fft_spectrum(const TimeTrace& trace) {
    return spectrum_of(trace.times, trace.p_singlet);
}

std::vector<double> peak_frequencies(const Spectrum& spec, int n_peaks) {
    std::vector<double> out;
    if (spec.magnitude.size() < 3 || n_peaks < 1) return out;
    const double total =
        std::accumulate(spec.magnitude.begin(), spec.magnitude.end(), 0.0);
    if (total < 1e-12) return out;  // flat trace: nothing above the floor
    const double floor = 1e-6 * *std::max_element(spec.magnitude.begin(),
                                                  spec.magnitude.end());

    std::vector<std::pair<double, std::size_t>> peaks;  // (magnitude, bin)
    for (std::size_t k = 1; k + 1 < spec.magnitude.size(); ++k) {
        const double m = spec.magnitude[k];
        if (m > spec.magnitude[k - 1] && m >= spec.magnitude[k + 1] && m > floor)
            peaks.emplace_back(m, k);
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const double df = spec.frequency[1] - spec.frequency[0];
    for (std::size_t i = 0; i < peaks.size() && out.size() < static_cast<std::size_t>(n_peaks); ++i) {
        const std::size_t k = peaks[i].second;
        const double m0 = spec.magnitude[k - 1];
        const double m1 = spec.magnitude[k];
        const double m2 = spec.magnitude[k + 1];
        const double denom = m0 - 2.0 * m1 + m2;
        const double shift = std::abs(denom) > 0.0 ? 0.5 * (m0 - m2) / denom : 0.0;
        out.push_back((static_cast<double>(k) + shift) * df);
    }
    return out;
}

namespace {

struct DampedCosInit {
    double a, f, phi, tau, c;
};

DampedCosInit initial_guess(std::span<const double> t,
                            std::span<const double> x) {
    const std::size_t n = t.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const Spectrum spec = spectrum_of(t, x);
    const std::vector<double> pk = peak_frequencies(spec, 1);
    if (pk.empty() || pk[0] <= 0.0)
        throw FitError("fit_rabi", "no oscillation detected in the trace");
    const double f0 = pk[0];

    double zc = 0.0, zs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ph = 2.0 * M_PI * f0 * t[i];
        zc += (x[i] - mean) * std::cos(ph);
        zs += (x[i] - mean) * std::sin(ph);
    }
    const double a0 = 2.0 * std::sqrt(zc * zc + zs * zs) / n;
    const double phi0 = std::atan2(-zs, zc);

    // Decay guess from the RMS amplitude of the first vs last quarter.
    const std::size_t q = n / 4;
    double e1 = 0.0, e4 = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
        e1 += (x[i] - mean) * (x[i] - mean);
        e4 += (x[n - 1 - i] - mean) * (x[n - 1 - i] - mean);
    }
    const double span = t.back() - t.front();
    double tau0 = 5.0 * span;
    if (e4 > 0.0 && e1 > 1.04 * e4) {
        const double t1 = t.front() + span / 8.0;
        const double t4 = t.back() - span / 8.0;
        tau0 = std::sqrt((t4 * t4 - t1 * t1) / std::log(e1 / e4));
    }
    return {a0, f0, phi0, tau0, mean};
}

void check_sampling(std::span<const double> t, double f0, double dt) {
    const double span = t.back() - t.front();
    if (span * f0 < 8.0 * 0.999)
        throw std::invalid_argument(
            "fit_rabi: need at least 8 oscillation periods in the trace");
    if (1.0 / (dt * f0) < 8.0 * 0.999)
        throw std::invalid_argument(
            "fit_rabi: need at least 8 samples per oscillation period");
}

std::vector<double> highpass(std::span<const double> t,
                             std::span<const double> x, double cutoff_ghz,
                             double dt) {
    const std::size_t n = x.size();
    std::size_t w = static_cast<std::size_t>(std::lround(1.0 / (cutoff_ghz * dt)));
    w = std::max<std::size_t>(w, 3);
    if (w % 2 == 0) ++w;
    const std::size_t half = w / 2;
    std::vector<double> out(n);
    // Centered moving mean, truncated at the edges (zero-phase).
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        const double m = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
        out[i] = x[i] - m;
    }
    return out;
}

RabiFit fit_damped_cos(std::span<const double> t, std::span<const double> x,
                       std::optional<double> tau_fixed) {
    const DampedCosInit g = initial_guess(t, x);

    const auto model = [&](const Eigen::VectorXd& p, double ti) {
        const double tau = std::abs(p(3));
        double env = std::exp(-(ti / tau) * (ti / tau));
        if (tau_fixed) {
            const double r = ti / *tau_fixed;
            env *= std::exp(-r * r);
        }
        return p(0) * std::cos(2.0 * M_PI * p(1) * ti + p(2)) * env + p(4);
    };
    const auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<int>(t.size()));
        for (int i = 0; i < r.size(); ++i) r(i) = model(p, t[i]) - x[i];
        return r;
    };

    Eigen::VectorXd p0(5);
    double tau_init = g.tau;
    if (tau_fixed) {
        // Remove the pinned channel from the combined decay estimate.
        const double inv = 1.0 / (g.tau * g.tau) - 1.0 / (*tau_fixed * *tau_fixed);
        tau_init = inv > 0.0 ? 1.0 / std::sqrt(inv) : 5.0 * (t.back() - t.front());
    }
    p0 << g.a, g.f, g.phi, tau_init, g.c;

    const LevMarResult res = levmar(residuals, p0);
    if (!res.converged)
        throw FitError("fit_rabi", "damped-cosine fit did not converge");

    RabiFit fit;
    fit.frequency = std::abs(res.params(1));
    fit.decay_1e = std::abs(res.params(3));
    fit.n_rabi = fit.frequency * fit.decay_1e;
    fit.residual = res.rss;
    fit.converged = true;
    return fit;
}

RabiFit fit_rabi_impl(const TimeTrace& trace,
                      std::optional<double> highpass_cutoff_ghz,
                      std::optional<double> tau_fixed) {
    if (trace.times.size() != trace.p_singlet.size())
        throw std::invalid_argument("fit_rabi: trace size mismatch");
    if (trace.times.size() < 16)
        throw std::invalid_argument("fit_rabi: trace too short");
    const double dt = check_uniform_dt(trace.times);

    std::vector<double> x = trace.p_singlet;
    if (highpass_cutoff_ghz) {
        if (!(*highpass_cutoff_ghz > 0.0))
            throw std::invalid_argument("fit_rabi: high-pass cutoff must be positive");
        x = highpass(trace.times, x, *highpass_cutoff_ghz, dt);
    }
    const DampedCosInit g = initial_guess(trace.times, x);
    check_sampling(trace.times, g.f, dt);
    return fit_damped_cos(trace.times, x, tau_fixed);
}

}  // namespace

RabiFit fit_rabi(const TimeTrace& trace,
                 std::optional<double> highpass_cutoff_ghz) {
    return fit_rabi_impl(trace, highpass_cutoff_ghz, std::nullopt);
}

RabiFit fit_rabi_two_gaussian(const TimeTrace& trace, double tau_fixed_ns,
                              std::optional<double> highpass_cutoff_ghz) {
    if (!(tau_fixed_ns > 0.0))
        throw std::invalid_argument("fit_rabi_two_gaussian: tau_fixed must be positive");
    return fit_rabi_impl(trace, highpass_cutoff_ghz, tau_fixed_ns);
}

InsensitivityEstimate measured_insensitivity(const DeviceModel& d,
                                             const GateVector& v,
                                             double perturbation_mv) {
    if (!(perturbation_mv > 0.0))
        throw std::invalid_argument("measured_insensitivity: perturbation must be positive");
    const double j0 = exchange_of_voltages(d, v);
    if (!(j0 > 0.0))
        throw NumericalError("measured_insensitivity", "zero exchange at this bias");
    // 10 periods at 16 points each: comfortably above the fit requirements.
    const std::vector<double> times =
        make_time_grid(10.0 / j0, 161);

    const RabiOptions opts;  // noiseless, analytic
    const auto freq_at = [&](const GateVector& bias) {
        const TimeTrace tr = rabi_trace(d, bias, times, std::nullopt, {}, opts);
        return fit_rabi(tr).frequency;
    };

    InsensitivityEstimate est;
    est.j = freq_at(v);
    est.grad = GateVector::Zero(d.n_gates());
    for (int k = 0; k < d.n_gates(); ++k) {
        GateVector vp = v, vm = v;
        vp(k) += perturbation_mv;
        vm(k) -= perturbation_mv;
        est.grad(k) = (freq_at(vp) - freq_at(vm)) / (2.0 * perturbation_mv);
    }
    est.insens = insensitivity(est.j, est.grad);
    return est;
}

std::vector<ContourSweepRow> insensitivity_contour_sweep(
    const DeviceModel& d, const ControlFrame& f, double j_target,
    std::span<const double> deltas, const NoiseModel& noise,
    const GateCorrelation& corr, const ContourSweepOptions& opts) {
    const auto contour = constant_j_contour(d, f, j_target, deltas);
    std::vector<ContourSweepRow> rows;
    rows.reserve(contour.size());

    for (std::size_t k = 0; k < contour.size(); ++k) {
        const ContourPoint& pt = contour[k];
        ContourSweepRow row;
        row.delta = pt.delta;
        row.vx = pt.vx;
        row.reachable = pt.reachable;
        if (!pt.reachable) {
            rows.push_back(row);
            continue;
        }
        row.j = pt.j;

        const InsensitivityEstimate est =
            measured_insensitivity(d, pt.bias, opts.perturbation_mv);
        row.i_meas = est.insens;
        row.i_gen = generalized_insensitivity(est.j, est.grad, corr);

        // Trace length from the expected decay under the injected weighting;
        // sigma_V depends on it only logarithmically, one refinement is enough.
        double sigma = sigma_v_effective(noise, 500.0);
        double tau_est = row.i_gen / (2.0 * M_PI * sigma * est.j);
        double t_max = opts.span_decay_times * tau_est;
        sigma = sigma_v_effective(noise, t_max);
        tau_est = row.i_gen / (2.0 * M_PI * sigma * est.j);
        t_max = opts.span_decay_times * tau_est;
        row.sigma_v = sigma_v_effective(noise, t_max);
        row.n_pred = row.i_meas / (2.0 * M_PI * row.sigma_v);
        row.n_pred_gen = row.i_gen / (2.0 * M_PI * row.sigma_v);

        if (opts.with_monte_carlo) {
            const double dt = 1.0 / (opts.points_per_period * est.j);
            const std::size_t nt =
                std::max<std::size_t>(static_cast<std::size_t>(t_max / dt), 64) + 1;
            const std::vector<double> times = make_time_grid(t_max, nt);
            RabiOptions ropts;
            ropts.mode = RabiMode::monte_carlo;
            ropts.seed = opts.seed + k;
            ropts.n_samples = opts.n_samples;
            ropts.threads = opts.threads;
            const TimeTrace tr = rabi_trace(d, pt.bias, times, noise, corr, ropts);
            const RabiFit fit = fit_rabi(tr, opts.highpass_cutoff_ghz);
            row.n_sim = fit.n_rabi;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<IvjRow> i_vs_j_sweep(const DeviceModel& d, const ControlFrame& f,
                                 const Axis& vx_axis) {
    std::vector<IvjRow> rows;
    rows.reserve(vx_axis.size());
    for (const double vx : vx_axis.values) {
        const GateVector bias = frame_bias(d, f, 0.0, vx);
        IvjRow row;
        row.vx = vx;
        row.j = exchange_of_voltages(d, bias);
        row.insens = insensitivity(row.j, grad_j(d, bias));
        rows.push_back(row);
    }
    return rows;
}

}

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dotsim/config.hpp"
#include "dotsim/errors.hpp"
#include "dotsim/experiment.hpp"
#include "dotsim/hubbard.hpp"
#include "dotsim/io.hpp"
#include "dotsim/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dotsim;

namespace {

struct CliState {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::optional<uint64_t> seed;
    int threads = 0;
};

json experiment_section(const RunConfig& rc) {
    if (rc.raw.contains("experiment")) return rc.raw["experiment"];
    return json::object();
}

double num_or(const json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j[key].get<double>() : fallback;
}

int int_or(const json& j, const std::string& key, int fallback) {
    return j.contains(key) ? j[key].get<int>() : fallback;
}

ControlFrame resolve_frame(const RunConfig& rc, int threads) {
    switch (rc.frame_mode) {
        case FrameMode::explicit_frame:
            return *rc.frame;
        case FrameMode::from_device:
            return frame_from_device(rc.device);
        case FrameMode::calibrate: {
            const DeviceModel& d = rc.device;
            const json cal = rc.raw.contains("calibration") ? rc.raw["calibration"]
                                                            : json::object();
            const int i1 = d.require_gate("P1");
            const int i2 = d.require_gate("P2");
            const int ix = d.require_gate("X1");
            const double g1 = d.l_delta(i1);
            const double g2 = d.l_delta(i2);
            const double gn = std::sqrt(g1 * g1 + g2 * g2);
            const double half =
                1.15 * (d.u / gn + 0.5 * d.cell_size) / std::sqrt(2.0);
            const int n = int_or(cal, "n_pixels", 181);
            const Axis p1 = linspace_axis("P1", "mV",
                                          num_or(cal, "p1_min", d.v0(i1) - half),
                                          num_or(cal, "p1_max", d.v0(i1) + half), n);
            const Axis p2 = linspace_axis("P2", "mV",
                                          num_or(cal, "p2_min", d.v0(i2) - half),
                                          num_or(cal, "p2_max", d.v0(i2) + half), n);
            const double lx = d.l_barrier(ix);
            const double vx_lo =
                num_or(cal, "vx_lo", (d.barrier.a - 1.5) / d.barrier.b / lx);
            const double vx_hi =
                num_or(cal, "vx_hi", (d.barrier.a - 0.8) / d.barrier.b / lx);
            const double t_ev = num_or(cal, "evolve_time_ns", 80.0);
            const ScanGrid lo = synth_stability_map(d, p1, p2, vx_lo, t_ev, threads);
            const ScanGrid hi = synth_stability_map(d, p1, p2, vx_hi, t_ev, threads);
            return calibrate_axes(lo, hi);
        }
    }
    throw ConfigError("frame: unresolved mode");
}

struct OutputSink {
    fs::path dir;
    std::vector<std::string> names;

    void write(const std::string& name, const std::string& body) {
        fs::create_directories(dir);
        write_text_file(dir / name, body);
        names.push_back(name);
    }
    void write_json(const std::string& name, const json& j) {
        write(name, j.dump(2) + "\n");
    }
};

void write_manifest(OutputSink& sink, const std::string& subcommand,
                    const RunConfig& rc) {
    json m;
    m["subcommand"] = subcommand;
    m["version"] = kVersion;
    m["seed"] = rc.seed;
    m["config_hash"] = hex64(fnv1a64(rc.raw.dump()));
    std::vector<std::string> outs = sink.names;
    std::sort(outs.begin(), outs.end());
    m["outputs"] = outs;
    sink.write("manifest.json", m.dump(2) + "\n");
}

RunConfig load_run_config(const CliState& cli, bool needs_seed) {
    if (cli.config_path.empty()) throw ConfigError("--config is required");
    json j = load_json_file(cli.config_path);
    for (const auto& ov : cli.overrides) apply_override(j, ov);
    RunConfig rc = parse_config(j);
    if (cli.seed) {
        rc.seed = *cli.seed;
        rc.seed_given = true;
    }
    if (!cli.out_dir.empty()) rc.output_dir = cli.out_dir;
    if (needs_seed && !rc.seed_given)
        throw ConfigError("a seed is required when Monte-Carlo sampling is enabled");
    return rc;
}

bool wants_monte_carlo(const json& exp) {
    if (exp.contains("mode") && exp["mode"].get<std::string>() == "monte_carlo")
        return true;
    return exp.contains("with_nrabi") && exp["with_nrabi"].get<bool>();
}

RabiOptions rabi_options(const json& exp, const RunConfig& rc, int threads) {
    RabiOptions o;
    if (exp.contains("mode"))
        o.mode = exp["mode"].get<std::string>() == "monte_carlo"
                     ? RabiMode::monte_carlo
                     : RabiMode::analytic;
    o.seed = rc.seed;
    o.n_samples = int_or(exp, "n_samples", 2000);
    o.t_hf_ns = num_or(exp, "t_hf_ns", std::numeric_limits<double>::infinity());
    o.contrast = num_or(exp, "contrast", 0.75);
    o.readout_shots = int_or(exp, "readout_shots", 0);
    o.threads = threads;
    return o;
}

TwoFreqOptions two_freq_options(const json& exp) {
    TwoFreqOptions tf;
    if (exp.contains("two_freq")) {
        const json& t = exp["two_freq"];
        tf.weight = num_or(t, "weight", 0.5);
        tf.j2_offset = num_or(t, "j2_offset", 0.0);
        tf.j2_scale = num_or(t, "j2_scale", 1.0);
    }
    return tf;
}

int run_levels(const CliState& cli) {
    RunConfig rc = load_run_config(cli, false);
    const json exp = experiment_section(rc);
    const double u = rc.device.u;
    std::vector<double> tcs{0.5, 1.0, 2.0};
    if (exp.contains("tc_values")) tcs = exp["tc_values"].get<std::vector<double>>();
    const double dmin = num_or(exp, "delta_min", -0.99 * u);
    const double dmax = num_or(exp, "delta_max", 0.99 * u);
    const int n = int_or(exp, "n_delta", 401);

    Table t;
    t.columns = {"delta_ghz", "triplet_ghz"};
    for (const double tc : tcs) {
        const std::string tag = "_tc" + format_double(tc);
        t.columns.push_back("e0" + tag);
        t.columns.push_back("e1" + tag);
        t.columns.push_back("e2" + tag);
        t.columns.push_back("j_exact" + tag);
        t.columns.push_back("j_sop" + tag);
        t.columns.push_back("j_detuning" + tag);
    }
    const Axis deltas = linspace_axis("delta", "GHz", dmin, dmax, n);
    for (const double delta : deltas.values) {
        std::vector<double> row{delta, 0.0};
        for (const double tc : tcs) {
            const DotPairParams p(u, tc, delta);
            const SingletSpectrum s = singlet_spectrum(p);
            row.push_back(s.energies[0]);
            row.push_back(s.energies[1]);
            row.push_back(s.energies[2]);
            row.push_back(exchange_exact(p));
            row.push_back(std::abs(delta) < u ? exchange_sop_approx(p)
                                              : std::nan(""));
            row.push_back(exchange_detuning_approx(p));
        }
        t.rows.push_back(std::move(row));
    }

    OutputSink sink{rc.output_dir, {}};
    sink.write("levels.csv", table_to_csv(t));
    sink.write_json("levels.json", table_to_json(t));
    write_manifest(sink, "levels", rc);
    return 0;
}

int run_rabi(const CliState& cli) {
    RunConfig pre = load_run_config(cli, false);
    const json exp = experiment_section(pre);
    RunConfig rc = load_run_config(cli, wants_monte_carlo(exp));
    const ControlFrame frame = resolve_frame(rc, cli.threads);

    const double delta = num_or(exp, "delta", 0.0);
    const double vx = num_or(exp, "vx", 0.0);
    const double t_max = num_or(exp, "t_max", 1000.0);
    const int n_times = int_or(exp, "n_times", 1001);
    const std::vector<double> times = make_time_grid(t_max, n_times);
    const GateVector bias = frame_bias(rc.device, frame, delta, vx);
    const RabiOptions opts = rabi_options(exp, rc, cli.threads);
    const TwoFreqOptions tf = two_freq_options(exp);

    const TimeTrace trace =
        tf.weight < 1.0
            ? two_freq_trace(rc.device, bias, times, tf, rc.noise,
                             rc.correlation, opts)
            : rabi_trace(rc.device, bias, times, rc.noise, rc.correlation, opts);

    OutputSink sink{rc.output_dir, {}};
    sink.write("rabi.csv", trace_to_csv(trace));
    sink.write_json("rabi.json", trace_to_json(trace));
    if (!exp.contains("with_fft") || exp["with_fft"].get<bool>())
        sink.write("rabi_fft.csv", spectrum_to_csv(fft_spectrum(trace)));
    write_manifest(sink, "rabi", rc);
    return 0;
}

int run_chevron(const CliState& cli) {
    RunConfig pre = load_run_config(cli, false);
    const json exp = experiment_section(pre);
    RunConfig rc = load_run_config(cli, wants_monte_carlo(exp));
    const ControlFrame frame = resolve_frame(rc, cli.threads);

    const Axis delta_ax =
        linspace_axis("delta", "GHz", num_or(exp, "delta_min", -16.0),
                      num_or(exp, "delta_max", 16.0), int_or(exp, "n_delta", 81));
    const Axis time_ax =
        linspace_axis("time", "ns", 0.0, num_or(exp, "t_max", 250.0),
                      int_or(exp, "n_times", 1001));
    const double vx = num_or(exp, "vx", 0.0);
    ScanGrid grid = chevron_scan(rc.device, frame, delta_ax, time_ax, vx,
                                 rc.noise, rc.correlation,
                                 rabi_options(exp, rc, cli.threads));

    OutputSink sink{rc.output_dir, {}};
    sink.write("chevron.csv", grid_to_csv(grid));
    sink.write_json("chevron.json", grid_to_json(grid));
    write_manifest(sink, "chevron", rc);
    return 0;
}

int run_fingerprint(const CliState& cli) {
    RunConfig rc = load_run_config(cli, false);
    const json exp = experiment_section(rc);
    const ControlFrame frame = resolve_frame(rc, cli.threads);

    const Axis delta_ax =
        linspace_axis("delta", "GHz", num_or(exp, "delta_min", -16.0),
                      num_or(exp, "delta_max", 16.0), int_or(exp, "n_delta", 161));
    const Axis vx_ax =
        linspace_axis("vx", "mV", num_or(exp, "vx_min", 150.0),
                      num_or(exp, "vx_max", 400.0), int_or(exp, "n_vx", 161));
    ScanGrid grid = fingerprint_scan(
        rc.device, frame, delta_ax, vx_ax, num_or(exp, "evolve_time_ns", 500.0),
        rc.noise, rc.correlation, two_freq_options(exp),
        rabi_options(exp, rc, cli.threads));

    OutputSink sink{rc.output_dir, {}};
    sink.write("fingerprint.csv", grid_to_csv(grid));
    sink.write_json("fingerprint.json", grid_to_json(grid));
    write_manifest(sink, "fingerprint", rc);
    return 0;
}

int run_contour(const CliState& cli) {
    RunConfig pre = load_run_config(cli, false);
    const json exp = experiment_section(pre);
    const bool with_nrabi =
        exp.contains("with_nrabi") && exp["with_nrabi"].get<bool>();
    RunConfig rc = load_run_config(cli, with_nrabi);
    const ControlFrame frame = resolve_frame(rc, cli.threads);

    const double j_target = num_or(exp, "j_target", 0.16);
    std::vector<double> deltas;
    if (exp.contains("deltas")) {
        deltas = exp["deltas"].get<std::vector<double>>();
    } else {
        const Axis ax = linspace_axis(
            "delta", "GHz", num_or(exp, "delta_min", -0.9 * rc.device.u),
            num_or(exp, "delta_max", 0.9 * rc.device.u), int_or(exp, "n_delta", 13));
        deltas = ax.values;
    }

    ContourSweepOptions opts;
    opts.seed = rc.seed;
    opts.n_samples = int_or(exp, "n_samples", 2000);
    opts.perturbation_mv = num_or(exp, "perturbation_mv", 0.5);
    opts.with_monte_carlo = with_nrabi;
    opts.threads = cli.threads;
    if (exp.contains("highpass_cutoff_ghz"))
        opts.highpass_cutoff_ghz = exp["highpass_cutoff_ghz"].get<double>();

    std::vector<ContourSweepRow> rows;
    if (with_nrabi) {
        if (!rc.noise)
            throw ConfigError("contour: with_nrabi requires a noise section");
        rows = insensitivity_contour_sweep(rc.device, frame, j_target, deltas,
                                           *rc.noise, rc.correlation, opts);
    } else {
        // No Monte-Carlo: reuse the sweep with the protocol measurements only.
        const auto contour = constant_j_contour(rc.device, frame, j_target, deltas);
        for (const auto& pt : contour) {
            ContourSweepRow row;
            row.delta = pt.delta;
            row.vx = pt.vx;
            row.j = pt.j;
            row.reachable = pt.reachable;
            if (pt.reachable) {
                const auto est = measured_insensitivity(rc.device, pt.bias,
                                                        opts.perturbation_mv);
                row.i_meas = est.insens;
                row.i_gen =
                    generalized_insensitivity(est.j, est.grad, rc.correlation);
                if (rc.noise) {
                    row.sigma_v = sigma_v_effective(*rc.noise, 500.0);
                    row.n_pred = row.i_meas / (2.0 * M_PI * row.sigma_v);
                    row.n_pred_gen = row.i_gen / (2.0 * M_PI * row.sigma_v);
                }
            }
            rows.push_back(row);
        }
    }

    std::size_t reachable = 0;
    for (const auto& r : rows) reachable += r.reachable ? 1 : 0;
    if (reachable == 0)
        throw NumericalError("constant_j_contour",
                             "target exchange energy unreachable at every detuning");

    Table t;
    t.columns = {"delta_ghz", "vx_mv",  "j_ghz",      "i_mv",  "i_gen_mv",
                 "sigma_v_mv", "n_pred", "n_pred_gen", "n_sim", "reachable"};
    for (const auto& r : rows)
        t.rows.push_back({r.delta, r.vx, r.j, r.i_meas, r.i_gen, r.sigma_v,
                          r.n_pred, r.n_pred_gen, r.n_sim,
                          r.reachable ? 1.0 : 0.0});

    OutputSink sink{rc.output_dir, {}};
    sink.write("contour.csv", table_to_csv(t));
    sink.write_json("contour.json", table_to_json(t));
    write_manifest(sink, "contour", rc);
    return 0;
}

int run_ivj(const CliState& cli) {
    RunConfig rc = load_run_config(cli, false);
    const json exp = experiment_section(rc);
    const ControlFrame frame = resolve_frame(rc, cli.threads);
    const Axis vx_ax =
        linspace_axis("vx", "mV", num_or(exp, "vx_min", 400.0),
                      num_or(exp, "vx_max", 700.0), int_or(exp, "n_vx", 31));
    const auto rows = i_vs_j_sweep(rc.device, frame, vx_ax);

    Table t;
    t.columns = {"vx_mv", "j_ghz", "i_mv"};
    for (const auto& r : rows) t.rows.push_back({r.vx, r.j, r.insens});

    OutputSink sink{rc.output_dir, {}};
    sink.write("ivj.csv", table_to_csv(t));
    sink.write_json("ivj.json", table_to_json(t));
    write_manifest(sink, "ivj", rc);
    return 0;
}

int run_calibrate(const CliState& cli) {
    RunConfig rc = load_run_config(cli, false);
    const DeviceModel& d = rc.device;
    const json cal =
        rc.raw.contains("calibration") ? rc.raw["calibration"] : json::object();
    const int i1 = d.require_gate("P1");
    const int i2 = d.require_gate("P2");
    const int ix = d.require_gate("X1");
    const double gn = std::hypot(d.l_delta(i1), d.l_delta(i2));
    const double half = 1.15 * (d.u / gn + 0.5 * d.cell_size) / std::sqrt(2.0);
    const int n = int_or(cal, "n_pixels", 181);
    const Axis p1 =
        linspace_axis("P1", "mV", num_or(cal, "p1_min", d.v0(i1) - half),
                      num_or(cal, "p1_max", d.v0(i1) + half), n);
    const Axis p2 =
        linspace_axis("P2", "mV", num_or(cal, "p2_min", d.v0(i2) - half),
                      num_or(cal, "p2_max", d.v0(i2) + half), n);
    const double lx = d.l_barrier(ix);
    const double vx_lo = num_or(cal, "vx_lo", (d.barrier.a - 1.5) / d.barrier.b / lx);
    const double vx_hi = num_or(cal, "vx_hi", (d.barrier.a - 0.8) / d.barrier.b / lx);
    const double t_ev = num_or(cal, "evolve_time_ns", 80.0);

    const ScanGrid lo = synth_stability_map(d, p1, p2, vx_lo, t_ev, cli.threads);
    const ScanGrid hi = synth_stability_map(d, p1, p2, vx_hi, t_ev, cli.threads);
    const ControlFrame frame = calibrate_axes(lo, hi);

    OutputSink sink{rc.output_dir, {}};
    sink.write("map_lo.csv", grid_to_csv(lo));
    sink.write("map_hi.csv", grid_to_csv(hi));
    sink.write_json("map_lo.json", grid_to_json(lo));
    sink.write_json("map_hi.json", grid_to_json(hi));
    sink.write_json("frame.json", frame_to_json(frame, d.gates));
    write_manifest(sink, "calibrate", rc);
    return 0;
}

int run_fitwkb(const CliState& cli) {
    RunConfig rc = load_run_config(cli, false);
    const json exp = experiment_section(rc);
    const ControlFrame frame = resolve_frame(rc, cli.threads);

    std::vector<std::pair<double, double>> data;
    if (exp.contains("data_csv")) {
        const fs::path path = exp["data_csv"].get<std::string>();
        std::ifstream f(path);
        if (!f) throw ConfigError("fitwkb: cannot open data file " + path.string());
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            data.emplace_back(std::stod(line.substr(0, comma)),
                              std::stod(line.substr(comma + 1)));
        }
    } else {
        const Axis vx_ax =
            linspace_axis("vx", "mV", num_or(exp, "vx_min", 400.0),
                          num_or(exp, "vx_max", 700.0), int_or(exp, "n_vx", 16));
        for (const double vx : vx_ax.values) {
            const GateVector bias = frame_bias(rc.device, frame, 0.0, vx);
            data.emplace_back(vx, exchange_of_voltages(rc.device, bias));
        }
    }

    WkbBarrier init = rc.device.barrier;
    if (exp.contains("init")) {
        const json& ij = exp["init"];
        init = WkbBarrier{num_or(ij, "t0", init.t0), num_or(ij, "a", init.a),
                          num_or(ij, "b", init.b)};
    } else if (!exp.contains("data_csv")) {
        // Self-generated sweeps are in exchange-axis units; fold the barrier
        // response into the initial slope.
        const double resp = rc.device.l_barrier.dot(frame.u_exchange);
        init = WkbBarrier{init.t0, init.a, init.b * resp};
    }
    WkbFitOptions fopts;
    fopts.j_min = num_or(exp, "j_min", 0.0);
    const WkbFitResult fit = fit_wkb(data, rc.device.u, init, fopts);
    if (!fit.converged)
        throw NumericalError("fit_wkb", "no convergence after " +
                                            std::to_string(fit.iterations) +
                                            " iterations; residual " +
                                            format_double(fit.residual));

    Table t;
    t.columns = {"v_mv", "j_ghz", "j_model_ghz"};
    for (const auto& [v, j] : data) {
        const DotPairParams p(rc.device.u, tc_of_voltage(fit.barrier, v), 0.0);
        t.rows.push_back({v, j, exchange_sop_approx(p)});
    }

    json jfit;
    jfit["t0"] = fit.barrier.t0;
    jfit["a"] = fit.barrier.a;
    jfit["b"] = fit.barrier.b;
    jfit["residual"] = fit.residual;
    jfit["iterations"] = fit.iterations;
    jfit["converged"] = fit.converged;

    OutputSink sink{rc.output_dir, {}};
    sink.write("fitwkb.csv", table_to_csv(t));
    sink.write_json("fitwkb.json", jfit);
    write_manifest(sink, "fitwkb", rc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Double-quantum-dot exchange simulator"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CliState cli;
    app.add_option("--threads", cli.threads, "worker cap (DOTSIM_THREADS as fallback)");

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "config file (JSON)")->required();
        sub->add_option("--set", cli.overrides, "override, e.g. noise.amplitude=0.3");
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_option("--seed", cli.seed, "Monte-Carlo seed");
    };

    CLI::App* levels = app.add_subcommand("levels", "eigenenergies and J vs detuning");
    CLI::App* rabi = app.add_subcommand("rabi", "time-domain exchange oscillation");
    CLI::App* chevron = app.add_subcommand("chevron", "oscillations vs detuning and time");
    CLI::App* fingerprint =
        app.add_subcommand("fingerprint", "probability vs detuning and exchange bias");
    CLI::App* contour =
        app.add_subcommand("contour", "insensitivity along a constant-J contour");
    CLI::App* ivj = app.add_subcommand("ivj", "insensitivity vs exchange energy");
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "recover control axes from stability maps");
    CLI::App* fitwkb = app.add_subcommand("fitwkb", "fit the barrier model to J(V)");
    for (CLI::App* sub :
         {levels, rabi, chevron, fingerprint, contour, ivj, calibrate, fitwkb})
        add_common(sub);

    std::optional<double> opt_delta, opt_tmax, opt_vx, opt_jtarget;
    rabi->add_option("--delta", opt_delta, "detuning, GHz");
    rabi->add_option("--tmax", opt_tmax, "trace length, ns");
    rabi->add_option("--vx", opt_vx, "exchange-axis bias, mV");
    contour->add_option("--j-target", opt_jtarget, "target exchange energy, GHz");

    CLI11_PARSE(app, argc, argv);

    if (opt_delta) cli.overrides.push_back("experiment.delta=" + format_double(*opt_delta));
    if (opt_tmax) cli.overrides.push_back("experiment.t_max=" + format_double(*opt_tmax));
    if (opt_vx) cli.overrides.push_back("experiment.vx=" + format_double(*opt_vx));
    if (opt_jtarget)
        cli.overrides.push_back("experiment.j_target=" + format_double(*opt_jtarget));

    try {
        if (levels->parsed()) return run_levels(cli);
        if (rabi->parsed()) return run_rabi(cli);
        if (chevron->parsed()) return run_chevron(cli);
        if (fingerprint->parsed()) return run_fingerprint(cli);
        if (contour->parsed()) return run_contour(cli);
        if (ivj->parsed()) return run_ivj(cli);
        if (calibrate->parsed()) return run_calibrate(cli);
        if (fitwkb->parsed()) return run_fitwkb(cli);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure in " << e.operation() << ": " << e.what()
                  << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

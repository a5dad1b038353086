#include "dotsim/config.hpp"

#include <fstream>

#include "dotsim/errors.hpp"

namespace dotsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

double number_at(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) fail(where, "missing field '" + key + "'");
    if (!j[key].is_number()) fail(where, "field '" + key + "' must be a number");
    return j[key].get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    return j[key].get<double>();
}

/// Per-gate values can be a full array (one entry per gate) or an object
/// keyed by gate name with zeros elsewhere.
GateVector per_gate_vector(const json& j, const std::vector<std::string>& gates,
                           const std::string& where, double fill = 0.0) {
    const int n = static_cast<int>(gates.size());
    GateVector v = GateVector::Constant(n, fill);
    if (j.is_number()) {
        v.setConstant(j.get<double>());
        return v;
    }
    if (j.is_array()) {
        if (static_cast<int>(j.size()) != n)
            fail(where, "array length does not match gate count");
        for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
        return v;
    }
    if (j.is_object()) {
        for (const auto& [name, val] : j.items()) {
            int idx = -1;
            for (int i = 0; i < n; ++i)
                if (gates[i] == name) idx = i;
            if (idx < 0) fail(where, "unknown gate '" + name + "'");
            v(idx) = val.get<double>();
        }
        return v;
    }
    fail(where, "expected number, array, or per-gate object");
}

}  // namespace

json load_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path.string());
    const std::string body((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line number for the diagnostic.
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < body.size(); ++i)
            if (body[i] == '\n') ++line;
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": " +
                          e.what());
    }
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must have the form path.to.key=value: " +
                          assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &config;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot - begin);
        if (key.empty()) throw ConfigError("bad override path: " + path);
        if (dot == std::string::npos) {
            try {
                (*node)[key] = json::parse(value);
            } catch (const json::parse_error&) {
                (*node)[key] = value;  // bare strings are fine
            }
            return;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

DeviceModel device_from_json(const json& j) {
    if (!j.is_object()) fail("device", "expected an object");
    DeviceModel d;
    d.gates = j.contains("gates")
                  ? j["gates"].get<std::vector<std::string>>()
                  : DeviceModel::default_gates();
    d.l_delta = per_gate_vector(j.contains("l_delta") ? j["l_delta"] : json::object(),
                                d.gates, "device.l_delta");
    d.l_barrier =
        per_gate_vector(j.contains("l_barrier") ? j["l_barrier"] : json::object(),
                        d.gates, "device.l_barrier");
    if (!j.contains("barrier")) fail("device", "missing field 'barrier'");
    const json& b = j["barrier"];
    d.barrier = WkbBarrier{number_at(b, "t0", "device.barrier"),
                           number_at(b, "a", "device.barrier"),
                           number_at(b, "b", "device.barrier")};
    d.u = number_at(j, "u", "device");
    d.u_t = number_or(j, "u_t", d.u);
    d.v0 = per_gate_vector(j.contains("v0") ? j["v0"] : json(0.0), d.gates,
                           "device.v0");
    d.cell_size = number_at(j, "cell_size", "device");
    try {
        d.validate();
    } catch (const std::exception& e) {
        fail("device", e.what());
    }
    return d;
}

json device_to_json(const DeviceModel& d) {
    json j;
    j["gates"] = d.gates;
    json ld = json::object(), lb = json::object(), v0 = json::object();
    for (int i = 0; i < d.n_gates(); ++i) {
        if (d.l_delta(i) != 0.0) ld[d.gates[i]] = d.l_delta(i);
        if (d.l_barrier(i) != 0.0) lb[d.gates[i]] = d.l_barrier(i);
        if (d.v0(i) != 0.0) v0[d.gates[i]] = d.v0(i);
    }
    j["l_delta"] = ld;
    j["l_barrier"] = lb;
    j["v0"] = v0;
    j["barrier"] = {{"t0", d.barrier.t0}, {"a", d.barrier.a}, {"b", d.barrier.b}};
    j["u"] = d.u;
    if (d.u_t != d.u) j["u_t"] = d.u_t;
    j["cell_size"] = d.cell_size;
    return j;
}

std::optional<NoiseModel> noise_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_object()) fail("noise", "expected an object");
    const std::string kind = j.contains("kind") ? j["kind"].get<std::string>()
                                                : "one_over_f";
    const double t_avg_s = number_or(j, "t_avg_s", 1.0);
    try {
        if (kind == "one_over_f")
            return NoiseModel::one_over_f(number_at(j, "amplitude", "noise"), t_avg_s);
        if (kind == "white")
            return NoiseModel::white(number_at(j, "s0_mv2_s", "noise"), t_avg_s);
    } catch (const std::exception& e) {
        fail("noise", e.what());
    }
    fail("noise", "unknown kind '" + kind + "' (one_over_f | white)");
}

GateCorrelation correlation_from_json(const json& j,
                                      const std::vector<std::string>& gates) {
    if (j.is_null()) return GateCorrelation::identity(static_cast<int>(gates.size()));
    if (!j.is_object()) fail("correlation", "expected an object");
    try {
        if (j.contains("weights")) {
            const GateVector w =
                per_gate_vector(j["weights"], gates, "correlation.weights", 1.0);
            return GateCorrelation::diagonal(w);
        }
        if (j.contains("plunger_weight") || j.contains("exchange_weight")) {
            return GateCorrelation::geometric(gates,
                                              number_or(j, "plunger_weight", 0.25),
                                              number_or(j, "exchange_weight", 1.0));
        }
        if (j.contains("matrix")) {
            const auto rows = j["matrix"].get<std::vector<std::vector<double>>>();
            const int n = static_cast<int>(rows.size());
            Eigen::MatrixXd c(n, n);
            for (int r = 0; r < n; ++r) {
                if (static_cast<int>(rows[r].size()) != n)
                    fail("correlation.matrix", "matrix must be square");
                for (int cidx = 0; cidx < n; ++cidx) c(r, cidx) = rows[r][cidx];
            }
            return GateCorrelation::matrix(c);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail("correlation", e.what());
    }
    return GateCorrelation::identity(static_cast<int>(gates.size()));
}

ControlFrame frame_from_json(const json& j,
                             const std::vector<std::string>& gates) {
    ControlFrame f;
    if (!j.contains("u_detuning") || !j.contains("u_exchange"))
        fail("frame", "explicit frame needs u_detuning and u_exchange");
    f.u_detuning = per_gate_vector(j["u_detuning"], gates, "frame.u_detuning");
    f.u_exchange = per_gate_vector(j["u_exchange"], gates, "frame.u_exchange");
    f.v0 = per_gate_vector(j.contains("v0") ? j["v0"] : json(0.0), gates, "frame.v0");
    f.u_detuning.normalize();
    f.u_exchange.normalize();
    try {
        f.validate();
    } catch (const std::exception& e) {
        fail("frame", e.what());
    }
    return f;
}

json frame_to_json(const ControlFrame& f, const std::vector<std::string>& gates) {
    json j;
    json det = json::object(), exch = json::object(), v0 = json::object();
    for (std::size_t i = 0; i < gates.size(); ++i) {
        det[gates[i]] = f.u_detuning(static_cast<int>(i));
        exch[gates[i]] = f.u_exchange(static_cast<int>(i));
        v0[gates[i]] = f.v0(static_cast<int>(i));
    }
    j["u_detuning"] = det;
    j["u_exchange"] = exch;
    j["v0"] = v0;
    return j;
}

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    RunConfig rc;
    rc.raw = j;
    if (!j.contains("device")) throw ConfigError("config: missing 'device' section");
    rc.device = device_from_json(j["device"]);
    rc.noise = noise_from_json(j.contains("noise") ? j["noise"] : json());
    rc.correlation = correlation_from_json(
        j.contains("correlation") ? j["correlation"] : json(), rc.device.gates);

    if (j.contains("frame")) {
        const json& fj = j["frame"];
        if (fj.is_string()) {
            const std::string mode = fj.get<std::string>();
            if (mode == "from_device")
                rc.frame_mode = FrameMode::from_device;
            else if (mode == "calibrate")
                rc.frame_mode = FrameMode::calibrate;
            else
                throw ConfigError("frame: unknown mode '" + mode +
                                  "' (from_device | calibrate | explicit object)");
        } else {
            rc.frame_mode = FrameMode::explicit_frame;
            rc.frame = frame_from_json(fj, rc.device.gates);
        }
    }

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("seed must be an integer");
        rc.seed = j["seed"].get<uint64_t>();
        rc.seed_given = true;
    }
    if (j.contains("output_dir"))
        rc.output_dir = j["output_dir"].get<std::string>();
    return rc;
}

}

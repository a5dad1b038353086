#include <doctest.h>

#include <json.hpp>

#include "dotsim/config.hpp"
#include "dotsim/errors.hpp"
#include "dotsim/io.hpp"

using namespace dotsim;

TEST_CASE("double formatting round-trips and is locale-free") {
    for (const double v : {0.1, -3.25, 1e-12, 6.02214076e23, 0.0, 479.0}) {
        CHECK(std::stod(format_double(v)) == v);
        CHECK(format_double(v).find(',') == std::string::npos);
    }
}

TEST_CASE("csv writers") {
    TimeTrace tr;
    tr.times = {0.0, 1.0, 2.0};
    tr.p_singlet = {1.0, 0.5, 0.25};
    const std::string csv = trace_to_csv(tr);
    CHECK(csv == "time_ns,p_singlet\n0,1\n1,0.5\n2,0.25\n");
    CHECK(csv.find('\r') == std::string::npos);

    ScanGrid g;
    g.x = Axis{"time", "ns", {0.0, 1.0}};
    g.y = Axis{"delta", "GHz", {-1.0, 1.0}};
    g.data = {0.1, 0.2, 0.3, 0.4};
    const std::string gcsv = grid_to_csv(g);
    CHECK(gcsv ==
          "delta_GHz\\time_ns,0,1\n-1,0.1,0.2\n1,0.3,0.4\n");

    Table t;
    t.columns = {"a", "b"};
    t.rows = {{1.0, 2.0}};
    CHECK(table_to_csv(t) == "a,b\n1,2\n");
    t.rows.push_back({1.0});
    CHECK_THROWS_AS(table_to_csv(t), std::invalid_argument);
}

TEST_CASE("metadata json round trip") {
    Metadata m;
    m.scalars["j_ghz"] = 0.16;
    m.strings["gates"] = "P1,P2";
    m.vectors["bias_mv"] = {1.0, -2.0};
    const Metadata back = metadata_from_json(metadata_to_json(m));
    CHECK(back.scalars == m.scalars);
    CHECK(back.strings == m.strings);
    CHECK(back.vectors == m.vectors);
}

TEST_CASE("fnv1a64 is stable") {
    CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
    CHECK(fnv1a64("dotsim") != fnv1a64("dotsin"));
}

TEST_CASE("config parsing and overrides") {
    nlohmann::json j = {
        {"device",
         {{"l_delta", {{"P1", 0.1}, {"P2", -0.1}}},
          {"l_barrier", {{"X1", 1.0}}},
          {"barrier", {{"t0", 5.0}, {"a", 3.0}, {"b", 0.05}}},
          {"u", 20.0},
          {"cell_size", 500.0}}},
        {"noise", {{"kind", "one_over_f"}, {"amplitude", 0.3}, {"t_avg_s", 1.0}}},
        {"seed", 7}};

    RunConfig rc = parse_config(j);
    CHECK(rc.device.gates.size() == 7);
    CHECK(rc.device.l_delta(0) == 0.1);
    CHECK(rc.noise.has_value());
    CHECK(rc.seed == 7);

    apply_override(j, "noise.amplitude=0.5");
    apply_override(j, "device.u=25");
    rc = parse_config(j);
    CHECK(rc.noise->amplitude == 0.5);
    CHECK(rc.device.u == 25.0);

    // Unknown gates are named in the diagnostic.
    nlohmann::json bad = j;
    bad["device"]["l_delta"]["P9"] = 0.2;
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("P9") != std::string::npos);
    }

    // Round trip through device_to_json.
    const DeviceModel ref = DeviceModel::reference();
    const DeviceModel back = device_from_json(device_to_json(ref));
    CHECK(back.gates == ref.gates);
    CHECK((back.l_delta - ref.l_delta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.l_barrier - ref.l_barrier).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.u == ref.u);
}

TEST_CASE("correlation config forms") {
    const std::vector<std::string> gates = DeviceModel::default_gates();
    const GateCorrelation geo = correlation_from_json(
        {{"plunger_weight", 0.25}}, gates);
    CHECK(geo.weights(0) == 0.25);  // P1
    CHECK(geo.weights(3) == 1.0);   // X1

    const GateCorrelation diag = correlation_from_json(
        {{"weights", {{"P1", 0.5}}}}, gates);
    CHECK(diag.weights(0) == 0.5);
    CHECK(diag.weights(1) == 1.0);

    CHECK_THROWS_AS(
        correlation_from_json({{"weights", {{"P9", 0.5}}}}, gates), ConfigError);
}

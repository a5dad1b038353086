#include <doctest.h>

#include <cmath>
#include <vector>

#include "dotsim/barrier.hpp"
#include "dotsim/hubbard.hpp"
#include "dotsim/rng.hpp"

using namespace dotsim;

TEST_CASE("tunnel coupling limits") {
    const WkbBarrier w{5.0, 3.0, 0.05};

    // phi = 0 at v = a/b.
    CHECK(tc_of_voltage(w, w.a / w.b) ==
          doctest::Approx(5.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-14));

    // Tall barrier: t0 exp(-phi)/2 to 1e-8 relative at phi = 10.
    const double v10 = (w.a - 10.0) / w.b;
    const double tall = 5.0 * std::exp(-10.0) / 2.0;
    CHECK(std::abs(tc_of_voltage(w, v10) - tall) / tall < 1e-8);

    // Vanishing barrier: saturates to t0 within 1e-4 at phi = -10.
    const double vm10 = (w.a + 10.0) / w.b;
    CHECK(std::abs(tc_of_voltage(w, vm10) - 5.0) / 5.0 < 1e-4);

    // Overflow guard far beyond double range for exp(2 phi).
    const double v_deep = (w.a - 400.0) / w.b;
    const double tc_deep = tc_of_voltage(w, v_deep);
    CHECK(std::isfinite(tc_deep));
    CHECK(tc_deep > 0.0);
    CHECK(tc_deep == doctest::Approx(5.0 * std::exp(-400.0) / 2.0));
}

TEST_CASE("tunnel coupling is increasing and bounded") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const WkbBarrier w{0.5 + 10.0 * rng.uniform(), 6.0 * rng.uniform() - 1.0,
                           0.01 + 0.2 * rng.uniform()};
        double prev = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double v = -300.0 + 6.0 * i;
            const double tc = tc_of_voltage(w, v);
            CHECK(tc > 0.0);
            CHECK(tc < w.t0);
            CHECK(tc > prev);
            prev = tc;
        }
    }
}

TEST_CASE("log J has decreasing slope where the barrier is shallow") {
    const WkbBarrier w{5.0, 3.0, 0.05};
    const double u = 20.0;
    // Sub-exponential region: action below ~2.
    std::vector<double> logj;
    std::vector<double> v;
    for (int i = 0; i <= 40; ++i) {
        v.push_back((w.a - 2.0) / w.b + 4.0 * i);  // phi from 2 downward
        const DotPairParams p(u, tc_of_voltage(w, v.back()), 0.0);
        logj.push_back(std::log(exchange_sop_approx(p)));
    }
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double slope_lo = (logj[i] - logj[i - 1]) / (v[i] - v[i - 1]);
        const double slope_hi = (logj[i + 1] - logj[i]) / (v[i + 1] - v[i]);
        CHECK(slope_hi < slope_lo);
    }
}

TEST_CASE("wkb fit recovers known parameters from noiseless data") {
    const WkbBarrier truth{5.0, 3.0, 0.05};
    const double u = 20.0;
    std::vector<std::pair<double, double>> data;
    for (int i = 0; i < 10; ++i) {
        const double phi = -2.0 + 5.0 * i / 9.0;
        const double v = (truth.a - phi) / truth.b;
        const DotPairParams p(u, tc_of_voltage(truth, v), 0.0);
        data.emplace_back(v, exchange_sop_approx(p));
    }
    const WkbBarrier init{6.5, 2.4, 0.04};
    const WkbFitResult fit = fit_wkb(data, u, init);
    CHECK(fit.converged);
    CHECK(std::abs(fit.barrier.t0 - truth.t0) / truth.t0 < 0.01);
    CHECK(std::abs(fit.barrier.a - truth.a) / truth.a < 0.01);
    CHECK(std::abs(fit.barrier.b - truth.b) / truth.b < 0.01);
}

TEST_CASE("wkb fit reproduces purely exponential data in the deep regime") {
    const double b_true = 0.05;
    const double c = 2e-4;
    const double u = 20.0;
    std::vector<std::pair<double, double>> data;
    for (int i = 0; i < 12; ++i) {
        const double v = 5.0 * i;
        data.emplace_back(v, c * std::exp(2.0 * b_true * v));
    }
    const WkbBarrier init{5.0, 8.0, 0.05};  // start deep in the barrier
    const WkbFitResult fit = fit_wkb(data, u, init);
    CHECK(fit.converged);
    for (const auto& [v, j] : data) {
        const DotPairParams p(u, tc_of_voltage(fit.barrier, v), 0.0);
        CHECK(std::abs(exchange_sop_approx(p) - j) / j < 0.02);
    }
}

TEST_CASE("wkb fit input validation") {
    const WkbBarrier init{5.0, 3.0, 0.05};
    std::vector<std::pair<double, double>> two = {{0.0, 0.01}, {10.0, 0.02}};
    CHECK_THROWS_AS(fit_wkb(two, 20.0, init), std::invalid_argument);

    std::vector<std::pair<double, double>> degenerate = {
        {5.0, 0.01}, {5.0, 0.02}, {5.0, 0.03}, {5.0, 0.04}};
    CHECK_THROWS_AS(fit_wkb(degenerate, 20.0, init), std::invalid_argument);

    std::vector<std::pair<double, double>> negative = {
        {0.0, 0.01}, {10.0, -0.02}, {20.0, 0.03}, {30.0, 0.04}};
    CHECK_THROWS_AS(fit_wkb(negative, 20.0, init), std::invalid_argument);
}

TEST_CASE("wkb fit honors the low-J threshold") {
    const WkbBarrier truth{5.0, 3.0, 0.05};
    const double u = 20.0;
    std::vector<std::pair<double, double>> data;
    for (int i = 0; i < 10; ++i) {
        const double phi = -2.0 + 5.0 * i / 9.0;
        const double v = (truth.a - phi) / truth.b;
        const DotPairParams p(u, tc_of_voltage(truth, v), 0.0);
        data.emplace_back(v, exchange_sop_approx(p));
    }
    // A stray low-J point where the model is known to break down.
    data.emplace_back(-120.0, 1e-7);

    WkbFitOptions opts;
    opts.j_min = 1e-5;
    const WkbFitResult fit = fit_wkb(data, u, WkbBarrier{6.5, 2.4, 0.04}, opts);
    CHECK(fit.converged);
    CHECK(std::abs(fit.barrier.t0 - truth.t0) / truth.t0 < 0.01);
    CHECK(std::abs(fit.barrier.a - truth.a) / truth.a < 0.01);
    CHECK(std::abs(fit.barrier.b - truth.b) / truth.b < 0.01);
}

TEST_CASE("barrier validation") {
    CHECK_THROWS_AS((WkbBarrier{0.0, 3.0, 0.05}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((WkbBarrier{5.0, 3.0, -0.05}.validate()), std::invalid_argument);
    CHECK_NOTHROW((WkbBarrier{5.0, -1.0, 0.05}.validate()));
}

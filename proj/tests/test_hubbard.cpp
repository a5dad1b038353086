#include <doctest.h>

#include <cmath>

#include "dotsim/hubbard.hpp"
#include "dotsim/rng.hpp"

using namespace dotsim;

namespace {

// Independent oracle: smallest eigenvalue of a symmetric 3x3 matrix by
// bisecting the characteristic polynomial. Shares nothing with the
// eigensolver used by the implementation.
double char_poly(const Eigen::Matrix3d& h, double x) {
    const double a = h(0, 0) - x, b = h(1, 1) - x, c = h(2, 2) - x;
    const double d = h(0, 1), e = h(0, 2), f = h(1, 2);
    return a * (b * c - f * f) - d * (d * c - e * f) + e * (d * f - e * b);
}

double oracle_min_eigenvalue(const Eigen::Matrix3d& h) {
    double lo = h(0, 0), hi = h(0, 0);
    for (int i = 0; i < 3; ++i) {
        double radius = 0.0;
        for (int j = 0; j < 3; ++j)
            if (i != j) radius += std::abs(h(i, j));
        lo = std::min(lo, h(i, i) - radius);
        hi = std::max(hi, h(i, i) + radius);
    }
    // Leading term of det(H - xI) is -x^3, so the polynomial is positive
    // left of the smallest root: scan for the first sign change.
    const int n_scan = 4096;
    double a = lo - 1.0, b = hi + 1.0;
    double pa = char_poly(h, a);
    REQUIRE(pa > 0.0);
    double step = (b - a) / n_scan;
    double x0 = a, x1 = a;
    for (int i = 1; i <= n_scan; ++i) {
        x1 = a + i * step;
        const double p1 = char_poly(h, x1);
        if (p1 <= 0.0) break;
        x0 = x1;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (x0 + x1);
        if (char_poly(h, mid) > 0.0)
            x0 = mid;
        else
            x1 = mid;
    }
    return 0.5 * (x0 + x1);
}

double oracle_exchange(const DotPairParams& p) {
    return -oracle_min_eigenvalue(singlet_hamiltonian(p));
}

}  // namespace

TEST_CASE("singlet hamiltonian structure") {
    const Eigen::Matrix3d h0 = singlet_hamiltonian(DotPairParams(20, 0, 0));
    CHECK(h0(0, 0) == doctest::Approx(20.0));
    CHECK(h0(1, 1) == doctest::Approx(0.0));
    CHECK(h0(2, 2) == doctest::Approx(20.0));
    CHECK(h0(0, 1) == 0.0);
    CHECK(h0(1, 2) == 0.0);
    CHECK(h0(0, 2) == 0.0);

    const Eigen::Matrix3d h = singlet_hamiltonian(DotPairParams(20, 1, 10));
    CHECK(h(0, 0) == doctest::Approx(30.0));
    CHECK(h(1, 1) == doctest::Approx(0.0));
    CHECK(h(2, 2) == doctest::Approx(10.0));
    CHECK(h(0, 1) == doctest::Approx(1.0));
    CHECK(h(1, 2) == doctest::Approx(1.0));
    CHECK(h(0, 2) == 0.0);
    CHECK(h == h.transpose());
}

TEST_CASE("hamiltonian mirror symmetry in detuning") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const double u = 5.0 + 45.0 * rng.uniform();
        const double tc = 3.0 * rng.uniform();
        const double delta = (2.0 * rng.uniform() - 1.0) * 0.95 * u;
        const Eigen::Matrix3d hp = singlet_hamiltonian(DotPairParams(u, tc, delta));
        const Eigen::Matrix3d hm = singlet_hamiltonian(DotPairParams(u, tc, -delta));
        // H(delta) equals H(-delta) with the doubly-occupied states swapped.
        Eigen::Matrix3d swap = Eigen::Matrix3d::Zero();
        swap(0, 2) = swap(2, 0) = swap(1, 1) = 1.0;
        CHECK((swap * hm * swap - hp).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("exchange_exact against the characteristic-polynomial oracle") {
    CHECK(exchange_exact(DotPairParams(20, 0, 0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(exchange_exact(DotPairParams(20, 0, 15)) == doctest::Approx(0.0).epsilon(1e-12));

    const DotPairParams sop(20, 1, 0);
    const double j_closed = std::sqrt(102.0) - 10.0;  // sqrt(2 tc^2 + U^2/4) - U/2
    CHECK(exchange_exact(sop) == doctest::Approx(j_closed).epsilon(1e-12));
    CHECK(exchange_exact(sop) == doctest::Approx(oracle_exchange(sop)).epsilon(1e-11));
    CHECK(j_closed == doctest::Approx(0.0995).epsilon(1e-3));

    const DotPairParams det(20, 1, 10);
    const double j_oracle = oracle_exchange(det);
    CHECK(exchange_exact(det) == doctest::Approx(j_oracle).epsilon(1e-11));
    // Detuning-regime closed form is within ~2% of the exact value here.
    const double j_s13 = std::sqrt(26.0) - 5.0;
    CHECK(std::abs(j_s13 - j_oracle) / j_oracle < 0.02);

    Rng rng(23);
    for (int i = 0; i < 50; ++i) {
        const double u = 5.0 + 95.0 * rng.uniform();
        const double tc = 0.01 + 0.1 * u * rng.uniform();
        const double delta = (2.0 * rng.uniform() - 1.0) * 1.2 * u;
        const DotPairParams p(u, tc, delta);
        CHECK(exchange_exact(p) ==
              doctest::Approx(oracle_exchange(p)).epsilon(1e-10));
    }
}

TEST_CASE("exchange_detuning_approx") {
    CHECK(exchange_detuning_approx(DotPairParams(20, 0, 12)) == 0.0);

    // Direct evaluation at U=20, tc=1, delta=10.
    CHECK(exchange_detuning_approx(DotPairParams(20, 1, 10)) ==
          doctest::Approx(std::sqrt(26.0) - 5.0).epsilon(1e-12));

    // Asymptote tc^2/(U-|delta|) in the deep-detuning small-tc limit.
    const double j_small = exchange_detuning_approx(DotPairParams(20, 0.25, 18));
    CHECK(std::abs(j_small - 0.25 * 0.25 / 2.0) / j_small < 0.02);
    // At tc=0.5 the asymptote is a rougher bound.
    const double j_half = exchange_detuning_approx(DotPairParams(20, 0.5, 18));
    CHECK(j_half == doctest::Approx(std::sqrt(1.25) - 1.0).epsilon(1e-12));
    CHECK(std::abs(j_half - 0.125) / j_half < 0.1);

    // Even in delta via |delta|.
    CHECK(exchange_detuning_approx(DotPairParams(20, 1, -10)) ==
          exchange_detuning_approx(DotPairParams(20, 1, 10)));
}

TEST_CASE("exchange_sop_approx") {
    const DotPairParams p0(20, 1, 0);
    CHECK(exchange_sop_approx(p0) ==
          doctest::Approx(std::sqrt(102.0) - 10.0).epsilon(1e-14));
    // Matches the exact eigensolve at delta = 0 (parity block-diagonalizes).
    CHECK(std::abs(exchange_sop_approx(p0) - exchange_exact(p0)) < 1e-12);

    // Small-tc limit 2 tc^2 U / (U^2 - delta^2).
    const double j_small = exchange_sop_approx(DotPairParams(20, 0.1, 0));
    CHECK(std::abs(j_small - 2.0 * 0.01 * 20.0 / 400.0) / j_small < 1e-4);

    CHECK(exchange_sop_approx(DotPairParams(20, 1, 10)) ==
          exchange_sop_approx(DotPairParams(20, 1, -10)));

    CHECK_THROWS_AS(exchange_sop_approx(DotPairParams(20, 1, 20)),
                    std::domain_error);
    CHECK_THROWS_AS(exchange_sop_approx(DotPairParams(20, 1, -25)),
                    std::domain_error);
}

TEST_CASE("exchange_excited_corrected") {
    CHECK(exchange_excited_corrected(DotPairParams(20, 1, 0, 25, 1)) ==
          doctest::Approx(1.0 / 20.0 - 1.0 / 25.0).epsilon(1e-14));
    // Vanishing triplet coupling reduces to tc_s^2 / U^s.
    CHECK(exchange_excited_corrected(DotPairParams(20, 1, 0, 25, 0)) ==
          doctest::Approx(1.0 / 20.0).epsilon(1e-14));
    // Identical singlet/triplet anti-crossings cancel.
    CHECK(exchange_excited_corrected(DotPairParams(20, 1, 0, 20, 1)) == 0.0);
}

TEST_CASE("dj_ddelta at and away from the sweet spot") {
    CHECK(std::abs(dj_ddelta(DotPairParams(20, 1, 0))) < 1e-8);
    CHECK(std::abs(dj_ddelta(DotPairParams(7.3, 0.4, 0))) < 1e-8);

    // Deep detuning: |dJ/ddelta| approaches J^2/tc^2.
    const DotPairParams p(20, 0.5, 18);
    const double j = exchange_exact(p);
    const double slope = dj_ddelta(p);
    CHECK(std::abs(slope - j * j / 0.25) / (j * j / 0.25) < 0.1);

    // Odd in delta.
    CHECK(dj_ddelta(DotPairParams(20, 0.5, 12)) ==
          doctest::Approx(-dj_ddelta(DotPairParams(20, 0.5, -12))).epsilon(1e-8));
}

TEST_CASE("exchange invariants over random parameters") {
    Rng rng(37);
    for (int i = 0; i < 40; ++i) {
        const double u = 5.0 + 95.0 * rng.uniform();
        const double tc = 0.005 * u + 0.08 * u * rng.uniform();
        const double delta = rng.uniform() * 0.95 * u;

        const double j = exchange_exact(DotPairParams(u, tc, delta));
        CHECK(j >= 0.0);
        // Mirror symmetry.
        CHECK(j == doctest::Approx(exchange_exact(DotPairParams(u, tc, -delta)))
                       .epsilon(1e-10));
        // Strictly increasing in tc.
        CHECK(exchange_exact(DotPairParams(u, tc * 1.05, delta)) > j);
        // Non-decreasing in |delta|.
        if (delta * 1.02 < 0.98 * u)
            CHECK(exchange_exact(DotPairParams(u, tc, delta * 1.02)) >= j - 1e-13);
        // dJ/dtc > 0 by finite difference.
        const double h = 1e-6 * tc;
        const double slope = (exchange_exact(DotPairParams(u, tc + h, delta)) -
                              exchange_exact(DotPairParams(u, tc - h, delta))) /
                             (2 * h);
        CHECK(slope > 0.0);
    }
}

TEST_CASE("detuning approximation accuracy in its regime") {
    Rng rng(41);
    for (int i = 0; i < 30; ++i) {
        const double u = 10.0 + 60.0 * rng.uniform();
        const double tc = 0.05 * u * rng.uniform() + 1e-3 * u;
        const double delta = (0.5 + 0.45 * rng.uniform()) * u;
        const DotPairParams p(u, tc, delta);
        const double exact = exchange_exact(p);
        const double approx = exchange_detuning_approx(p);
        CHECK(std::abs(approx - exact) / exact < 0.05);
    }
}

TEST_CASE("sop approximation equals exact at zero detuning over random params") {
    Rng rng(43);
    for (int i = 0; i < 30; ++i) {
        const double u = 5.0 + 95.0 * rng.uniform();
        const double tc = 0.001 * u + 0.2 * u * rng.uniform();
        const DotPairParams p(u, tc, 0.0);
        CHECK(std::abs(exchange_sop_approx(p) - exchange_exact(p)) < 1e-12 * u);
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(DotPairParams(0.0, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(DotPairParams(20, -1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(DotPairParams(20, 1, 0, 10, 1).validate(),
                    std::invalid_argument);
    CHECK_NOTHROW(DotPairParams(20, 1, 0, 25, 0.5).validate());
}

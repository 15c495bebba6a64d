#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "srcp/engine.hpp"
#include "srcp/physics.hpp"

using namespace srcp;
using Catch::Approx;
using cplx = std::complex<double>;

namespace {

TransitionParams cs672_params() {
    TransitionParams p;
    p.lambda_um = 0.672;
    p.gamma_mhz = 15.0;
    p.c3_mhz_um3 = 0.01;
    return p;
}

// The coherence exponent evaluated in SI units from scratch.
cplx exponent_si(double z_um, double zp_um, double v, double delta_mhz, const TransitionParams& p) {
    const double z = z_um * 1e-6, zp = zp_um * 1e-6;
    const double gamma = p.gamma_mhz * 1e6, delta = delta_mhz * 1e6;
    const double lambda = p.lambda_um * 1e-6;
    const cplx c3 = cplx(p.c3_mhz_um3, p.c3_imag_mhz_um3) * 1e6 * 1e-18;  // Hz m^3
    const double c5 = p.c5_mhz_um5 * 1e6 * 1e-30;                          // Hz m^5
    const cplx path = c3 * 0.5 * (1.0 / (z * z) - 1.0 / (zp * zp)) +
                      c5 * 0.25 * (1.0 / std::pow(z, 4) - 1.0 / std::pow(zp, 4));
    const cplx i(0.0, 1.0);
    return (2.0 * M_PI / v) * ((0.5 * gamma - i * (delta - v / lambda)) * (zp - z) - i * path);
}

// J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt; the trapezoid rule is spectrally
// accurate for this periodic integrand.
double bessel_integral(int n, double x) {
    const int m = 2000;
    double s = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double t = M_PI * k / m;
        const double w = (k == 0 || k == m) ? 0.5 : 1.0;
        s += w * std::cos(n * t - x * std::sin(t));
    }
    return s / m;
}

}  // namespace

TEST_CASE("unit audit: the exponent in internal units equals the SI evaluation") {
    const TransitionParams p = cs672_params();
    const cplx a = coherence_exponent(0.5, 0.25, 250.0, 0.0, p);
    const cplx b = exponent_si(0.5, 0.25, 250.0, 0.0, p);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        TransitionParams q;
        q.lambda_um = 0.4 + 0.6 * U(rng);
        q.gamma_mhz = 1.0 + 100.0 * U(rng);
        q.c3_mhz_um3 = 10.0 * U(rng);
        q.c3_imag_mhz_um3 = 5.0 * U(rng);
        q.c5_mhz_um5 = U(rng);
        const double z = 0.05 + 3.0 * U(rng), zp = z * U(rng) + 1e-3;
        const double v = 1.0 + 800.0 * U(rng), d = -500.0 + 1000.0 * U(rng);
        const cplx x = coherence_exponent(z, zp, v, d, q);
        const cplx y = exponent_si(z, zp, v, d, q);
        REQUIRE(std::abs(x - y) <= 1e-12 * std::abs(y));
    }
}

TEST_CASE("exponent reduces to the free-atom form without a surface potential") {
    TransitionParams p = cs672_params();
    p.c3_mhz_um3 = 0.0;
    const double z = 0.8, zp = 0.3, v = 180.0, d = 12.0;
    const cplx expect = (2.0 * M_PI / v) * cplx(0.5 * p.gamma_mhz, -(d - v / p.lambda_um)) * (zp - z);
    CHECK(std::abs(coherence_exponent(z, zp, v, d, p) - expect) <= 1e-14 * std::abs(expect));
    CHECK(coherence_exponent(z, z, v, d, p) == cplx(0.0, 0.0));
}

TEST_CASE("decay stability: Re[exponent] <= 0 for z' <= z") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        TransitionParams p;
        p.lambda_um = 0.4 + U(rng);
        p.gamma_mhz = 0.1 + 200.0 * U(rng);
        p.c3_mhz_um3 = 20.0 * U(rng);
        p.c3_imag_mhz_um3 = 20.0 * U(rng);
        p.c5_mhz_um5 = 2.0 * U(rng);
        const double z = 1e-3 + 5.0 * U(rng), zp = z * U(rng) + 1e-4;
        if (zp > z) continue;
        REQUIRE(coherence_exponent(z, zp, 1.0 + 1000.0 * U(rng), -1e3 + 2e3 * U(rng), p).real() <= 0.0);
    }
    CHECK_THROWS_AS(coherence_exponent(0.1, 0.2, 100.0, 0.0, cs672_params()), ContractViolation);
    CHECK_THROWS_AS(coherence_exponent(0.2, 0.1, 0.0, 0.0, cs672_params()), DomainError);
}

TEST_CASE("potential phase integral is antisymmetric and matches direct quadrature") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.01, 3.0);
    const cplx c3(8.8, 1.5);
    for (int k = 0; k < 500; ++k) {
        const double a = U(rng), b = U(rng);
        const cplx f = potential_phase_integral(a, b, c3, 0.3);
        const cplx g = potential_phase_integral(b, a, c3, 0.3);
        REQUIRE(std::abs(f + g) <= 1e-13 * std::max(1.0, std::abs(f)));
    }
    // Midpoint rule on a log grid as an independent check.
    const double a = 0.07, b = 1.3;
    const int n = 200000;
    cplx s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t0 = std::log(a) + (std::log(b) - std::log(a)) * i / n;
        const double t1 = std::log(a) + (std::log(b) - std::log(a)) * (i + 1) / n;
        const double xi = std::exp(0.5 * (t0 + t1));
        s += (c3 / std::pow(xi, 3) + 0.3 / std::pow(xi, 5)) * xi * (t1 - t0);
    }
    CHECK(std::abs(potential_phase_integral(a, b, c3, 0.3) - s) <= 1e-8 * std::abs(s));
    CHECK_THROWS_AS(potential_phase_integral(0.0, 1.0, c3, 0.0), SingularityError);
}

TEST_CASE("bessel_j matches the integral representation and the recurrence") {
    for (int n = 0; n <= 64; n += 3)
        for (double x : {0.05, 0.5, 1.0, 3.3, 10.0, 27.0, 50.0})
            REQUIRE(std::abs(bessel_j(n, x) - bessel_integral(n, x)) < 1e-10);
    for (int n = 1; n <= 40; ++n)
        for (double x = 0.1; x <= 20.0; x += 0.37) {
            const double r = bessel_j(n - 1, x) + bessel_j(n + 1, x) - (2.0 * n / x) * bessel_j(n, x);
            REQUIRE(std::abs(r) < 1e-10);
        }
    CHECK(bessel_j(-3, 2.0) == -bessel_j(3, 2.0));
    CHECK(bessel_j(3, -2.0) == -bessel_j(3, 2.0));
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(5, 0.0) == 0.0);
}

TEST_CASE("mb_weight is normalised and even") {
    const double vp = most_probable_velocity(500.0, units::cesium_mass_amu);
    // Trapezoid over +-10 v_p; the Gaussian tail beyond is ~1e-44.
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double v = -10.0 * vp + 20.0 * vp * i / n;
        s += ((i == 0 || i == n) ? 0.5 : 1.0) * mb_weight(v, vp);
    }
    s *= 20.0 * vp / n;
    CHECK(s == Approx(1.0).epsilon(1e-10));
    for (double v : {0.0, 10.0, 123.0, 700.0}) CHECK(mb_weight(v, vp) == mb_weight(-v, vp));
    CHECK_THROWS_AS(mb_weight(1.0, 0.0), DomainError);
}

TEST_CASE("most probable velocity of cesium") {
    // sqrt(2 k T / m) for 133Cs at 500 K.
    CHECK(most_probable_velocity(500.0, units::cesium_mass_amu) == Approx(250.12).epsilon(1e-4));
    CHECK(most_probable_velocity(0.0, 1.0) == 0.0);
    CHECK_THROWS_AS(most_probable_velocity(-1.0, 1.0), DomainError);
}

TEST_CASE("logistic cutoff is monotone non-increasing") {
    double prev = 2.0;
    for (double z = 0.0; z < 40.0; z += 0.013) {
        const double f = logistic_cutoff(z, 13.4, 2.97);
        REQUIRE(f <= prev);
        prev = f;
    }
    CHECK(logistic_cutoff(13.4, 13.4, 2.97) == 0.5);
}

TEST_CASE("imaginary C3 from the surface response") {
    SurfaceResponse s;
    s.epsilon = {2.0, 0.5};
    s.frequency_thz = 10.0;
    s.mu_ea = 1.0;
    s.temperature_k = 500.0;
    REQUIRE(image_coefficient_imag(s.epsilon) >= 0.0);
    CHECK(c3_imaginary(s) >= 0.0);
    const double nbar = 1.0 / std::expm1(units::planck_j_s * 10e12 / (units::boltzmann_j_per_k * 500.0));
    const cplx e = s.epsilon;
    CHECK(c3_imaginary(s) == Approx(2.0 * std::imag((e - 1.0) / (e + 1.0)) * nbar).epsilon(1e-14));
    s.temperature_k = 1.0;
    CHECK(c3_imaginary(s) < 1e-200);
    s.epsilon = {-1.0, 0.0};
    CHECK_THROWS_AS(c3_imaginary(s), SingularityError);
}

TEST_CASE("parameter validation") {
    TransitionParams p = cs672_params();
    CHECK_NOTHROW(validate(p));
    p.gamma_mhz = 0.0;
    CHECK_THROWS_AS(validate(p), DomainError);
    p = cs672_params();
    p.c3_imag_mhz_um3 = -1.0;
    CHECK_THROWS_AS(validate(p), DomainError);
    CHECK_THROWS_AS(validate(VelocityModel{MaxwellBoltzmann{-5.0}}), DomainError);
    CHECK_THROWS_AS(validate(ModulationParams{-1.0, 1.0, std::nullopt}), DomainError);
    CHECK_THROWS_AS(validate(ModulationParams{1.0, 1.0, 0}), DomainError);
}

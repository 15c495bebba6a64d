#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "srcp/cell_kernel.hpp"
#include "srcp/engine.hpp"
#include "srcp/quadrature.hpp"

using namespace srcp;
using Catch::Approx;
using cplx = std::complex<double>;

TEST_CASE("Gauss-Legendre rules integrate polynomials of degree 2n-1 exactly") {
    for (int n : {1, 2, 4, 7, 12}) {
        const NodeSet r = gauss_legendre(n);
        REQUIRE(r.size() == static_cast<std::size_t>(n));
        for (int d = 0; d <= 2 * n - 1; ++d) {
            double s = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], d);
            const double exact = d % 2 ? 0.0 : 2.0 / (d + 1);
            REQUIRE(s == Approx(exact).margin(1e-14));
        }
    }
    CHECK_THROWS_AS(gauss_legendre(0), DomainError);
}

TEST_CASE("panel edges cover the range with fine panels and then geometric growth") {
    PanelLayout l;
    l.fine_width = 2.0;
    l.fine_end = 10.0;
    l.growth = 1.5;
    l.max_width = 20.0;
    const auto e = panel_edges(0.0, 200.0, l);
    CHECK(e.front() == 0.0);
    CHECK(e.back() == 200.0);
    for (std::size_t i = 1; i < e.size(); ++i) {
        REQUIRE(e[i] > e[i - 1]);
        const double w = e[i] - e[i - 1];
        if (e[i] <= 10.0) REQUIRE(w == Approx(2.0));
        REQUIRE(w <= 20.0 * 1.2 + 1e-12);
    }
    const NodeSet r = composite_rule(e, 4);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::exp(-r.nodes[i] / 30.0);
    CHECK(s == Approx(30.0 * (1.0 - std::exp(-200.0 / 30.0))).epsilon(1e-10));
}

TEST_CASE("cell psi functions agree with direct quadrature on both sides of the series switch") {
    using boost::math::quadrature::gauss_kronrod;
    for (double mag : {1e-4, 0.01, 0.049, 0.051, 0.3, 2.0, 40.0})
        for (double ang : {0.0, 0.7, 1.9, 3.0, -2.4}) {
            const cplx w = std::polar(mag, ang);
            const detail::Psi012 p = detail::psi012(w, std::exp(w));
            const cplx ref[3] = {
                gauss_kronrod<double, 61>::integrate([&](double x) { return std::exp(w * x); }, 0.0, 1.0, 0, 1e-15),
                gauss_kronrod<double, 61>::integrate([&](double x) { return x * std::exp(w * x); }, 0.0, 1.0, 0,
                                                     1e-15),
                gauss_kronrod<double, 61>::integrate([&](double x) { return x * x * std::exp(w * x); }, 0.0, 1.0,
                                                     0, 1e-15)};
            const cplx got[3] = {p.p0, p.p1, p.p2};
            for (int n = 0; n < 3; ++n) REQUIRE(std::abs(got[n] - ref[n]) <= 1e-11 * std::abs(ref[n]));
            if (mag <= 2.0) REQUIRE(std::abs(detail::psi_series(2, w) - ref[2]) <= 1e-12 * std::abs(ref[2]));
        }
}

TEST_CASE("resolved quadrature defaults and validation") {
    TransitionParams p;
    p.lambda_um = 0.512;
    p.gamma_mhz = 50.0;
    p.c3_mhz_um3 = 8.8;
    const ResolvedQuadrature r = resolve({}, p);
    const double depth = std::cbrt(8.8 / 50.0);
    CHECK(r.dz_um == Approx(std::min(0.512 / 40.0, depth / 5.0)));
    CHECK(r.k_c_per_um == Approx(2.0 / 0.512));
    CHECK(r.z_c_um == Approx(std::max(20.0 * 0.512, 5.0 * depth)));
    CHECK(r.z_max_um == Approx(r.z_c_um + 10.0 / r.k_c_per_um));
    CHECK(r.dz_far_um >= r.dz_um);

    const auto edges = detail::cell_edges(r);
    CHECK(edges.front() == 0.0);
    CHECK(edges.back() <= r.z_max_um);
    CHECK(edges.back() > r.z_max_um - 1.05 * r.dz_far_um);
    for (std::size_t i = 1; i < edges.size(); ++i) {
        const double h = edges[i] - edges[i - 1];
        REQUIRE(h > 0.0);
        REQUIRE(h <= r.dz_far_um * (1.0 + 1e-9));
        if (edges[i] <= r.far_start_um) REQUIRE(h <= r.dz_um * (1.0 + 1e-9));
    }

    QuadratureConfig bad;
    bad.dz_um = 0.512 / 4.0;
    CHECK_THROWS_AS(resolve(bad, p), DomainError);
    bad = {};
    bad.dz_far_um = 0.5 * r.dz_um;
    bad.dz_um = r.dz_um;
    CHECK_THROWS_AS(resolve(bad, p), DomainError);
}

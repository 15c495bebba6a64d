#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "srcp/spectrum.hpp"

using namespace srcp;
using Catch::Approx;
using cplx = std::complex<double>;

namespace {

TransitionParams d1_params() {
    TransitionParams p;
    p.lambda_um = 0.894;
    p.gamma_mhz = 10.0;
    p.c3_mhz_um3 = 1.2e-3;
    return p;
}

TransitionParams cs672_params() {
    TransitionParams p;
    p.lambda_um = 0.672;
    p.gamma_mhz = 15.0;
    p.c3_mhz_um3 = 0.01;
    return p;
}

double rms(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<double> normalized(std::vector<double> y) {
    double m = 0.0;
    for (double x : y) m = std::max(m, std::abs(x));
    for (double& x : y) x /= m;
    return y;
}

const ModulationParams unit_mod{1.0, 1.0, std::nullopt};

}  // namespace

TEST_CASE("motionless I_SR without surface potential matches the closed form") {
    TransitionParams p = d1_params();
    p.c3_mhz_um3 = 0.0;
    const double k = p.k_per_um();
    for (double d = -10.0 * p.gamma_mhz; d <= 10.0 * p.gamma_mhz; d += 2.5) {
        const cplx got = isr_motionless(d, p, {});
        const cplx closed = cplx(0.0, 1.0) / (2.0 * k) / (2.0 * M_PI * cplx(0.5 * p.gamma_mhz, -d));
        REQUIRE(std::abs(got - closed) <= 0.01 * std::abs(closed));
        // Parity of the Lorentzian modulus.
        REQUIRE(std::abs(std::abs(got) - std::abs(isr_motionless(-d, p, {}))) <= 1e-10 * std::abs(got));
    }
}

TEST_CASE("spectra are bit-identical for any worker count") {
    const auto grid = detuning_grid(-40.0, 40.0, 5.0);
    QuadratureConfig one, many;
    one.threads = 1;
    many.threads = 3;
    const TransitionParams p = d1_params();
    const Spectrum a = fmsr_small_modulation(grid, p, MaxwellBoltzmann{525.0}, one, unit_mod, {});
    const Spectrum b = fmsr_small_modulation(grid, p, MaxwellBoltzmann{525.0}, many, unit_mod, {});
    CHECK(a.signal == b.signal);
    CHECK(a.isr == b.isr);
    const Spectrum c = fmsr_small_modulation(grid, p, InfiniteDoppler{}, one, unit_mod, {});
    const Spectrum d = fmsr_small_modulation(grid, p, InfiniteDoppler{}, many, unit_mod, {});
    CHECK(c.signal == d.signal);
}

TEST_CASE("signal shape does not depend on density or dipole moment") {
    const auto grid = detuning_grid(-30.0, 30.0, 5.0);
    TransitionParams p = d1_params();
    p.dipole_cm = 2.7e-29;
    p.density_m3 = 1e20;
    const NormalizationInfo n1 = normalization(p);
    CHECK_FALSE(n1.arbitrary_units);
    CHECK(n1.prefactor < 0.0);  // negative for n = 1.76
    const Spectrum a = sr_signal(grid, p, MaxwellBoltzmann{525.0}, {}, n1);
    p.density_m3 = 2e20;
    const NormalizationInfo n2 = normalization(p);
    CHECK(n2.prefactor == Approx(2.0 * n1.prefactor).epsilon(1e-15));
    const Spectrum b = sr_signal(grid, p, MaxwellBoltzmann{525.0}, {}, n2);
    const auto na = normalized(a.signal), nb = normalized(b.signal);
    for (std::size_t i = 0; i < na.size(); ++i) REQUIRE(std::abs(na[i] - nb[i]) <= 1e-12);
    p.density_m3.reset();
    CHECK(normalization(p).arbitrary_units);
}

TEST_CASE("small-modulation FMSR is the detuning derivative of the direct signal") {
    const TransitionParams p = d1_params();
    const double h = p.gamma_mhz / 50.0;
    const auto grid = detuning_grid(-50.0, 50.0, 5.0);
    // One batch for all shifted points keeps the velocity rule identical.
    std::vector<double> shifted;
    for (double d : grid) {
        shifted.push_back(d - h);
        shifted.push_back(d + h);
    }
    const Spectrum direct = sr_signal(shifted, p, MaxwellBoltzmann{525.0}, {}, {});
    std::vector<double> fd;
    for (std::size_t i = 0; i < grid.size(); ++i)
        fd.push_back((direct.signal[2 * i + 1] - direct.signal[2 * i]) / (2.0 * h));
    const Spectrum fm = fmsr_small_modulation(grid, p, MaxwellBoltzmann{525.0}, {}, unit_mod, {});
    std::vector<double> diff(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = fm.signal[i] - fd[i];
    CHECK(rms(diff) <= 0.005 * rms(fd));

    const Spectrum fm3 = fmsr_small_modulation(grid, p, MaxwellBoltzmann{525.0}, {}, {3.0, 1.0, std::nullopt}, {});
    for (std::size_t i = 0; i < grid.size(); ++i) REQUIRE(fm3.signal[i] == 3.0 * fm.signal[i]);
}

TEST_CASE("sideband sum vanishes at zero modulation and tends to the derivative") {
    const TransitionParams p = d1_params();
    const auto grid = detuning_grid(-50.0, 50.0, 5.0);
    const Spectrum zero = fmsr_bessel(grid, p, MaxwellBoltzmann{525.0}, {}, {0.0, 1.0, std::nullopt}, {});
    for (double y : zero.signal) REQUIRE(y == 0.0);

    const double f = p.gamma_mhz / 30.0;
    const ModulationParams mod{0.05 * f, f, std::nullopt};
    const Spectrum bessel = fmsr_bessel(grid, p, MaxwellBoltzmann{525.0}, {}, mod, {});
    const Spectrum small = fmsr_small_modulation(grid, p, MaxwellBoltzmann{525.0}, {}, mod, {});
    std::vector<double> diff(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = bessel.signal[i] - small.signal[i];
    CHECK(rms(diff) <= 0.02 * rms(small.signal));

    // An explicit order too small for the argument is reported.
    const Spectrum trunc = fmsr_bessel(grid, p, Motionless{}, {}, {3.0, 1.0, 1}, {});
    CHECK_FALSE(trunc.meta.warnings.empty());
}

TEST_CASE("infinite-Doppler model offers only derivative signals") {
    const auto grid = detuning_grid(-10.0, 10.0, 5.0);
    const TransitionParams p = d1_params();
    try {
        sr_signal(grid, p, InfiniteDoppler{}, {}, {});
        FAIL("expected UnsupportedModel");
    } catch (const UnsupportedModel& e) {
        CHECK(std::string(e.what()).find("fmsr_small_modulation") != std::string::npos);
    }
    CHECK_THROWS_AS(fmsr_bessel(grid, p, InfiniteDoppler{}, {}, unit_mod, {}), UnsupportedModel);
    const Spectrum s = fmsr_small_modulation(grid, p, InfiniteDoppler{}, {}, unit_mod, {});
    CHECK(s.kind == SignalKind::InfiniteDopplerDerivative);
}

TEST_CASE("infinite-Doppler derivative without surface potential is centred on the line") {
    // The direct signal has its log-singular peak at delta = 0, so the derivative
    // is odd, crosses zero there and has its extrema at +-Gamma/2.
    TransitionParams p = cs672_params();
    p.c3_mhz_um3 = 0.0;
    const double step = 1.5;
    const auto grid = detuning_grid(-60.0, 60.0, step);
    const Spectrum s = fmsr_small_modulation(grid, p, InfiniteDoppler{}, {}, unit_mod, {});
    const std::size_t n = grid.size();
    double peak = 0.0;
    for (double y : s.signal) peak = std::max(peak, std::abs(y));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(s.signal[i] + s.signal[n - 1 - i]) < 0.02 * peak);
    std::size_t crossing = 0;
    for (std::size_t i = 1; i < n; ++i)
        if ((s.signal[i - 1] < 0.0) != (s.signal[i] < 0.0) && std::abs(grid[i]) < 3.0 * step) crossing = i;
    REQUIRE(crossing > 0);
    CHECK(std::abs(grid[crossing]) <= step);
    const auto lo = std::min_element(s.signal.begin(), s.signal.end()) - s.signal.begin();
    const auto hi = std::max_element(s.signal.begin(), s.signal.end()) - s.signal.begin();
    CHECK(std::abs(std::abs(grid[static_cast<std::size_t>(lo)]) - 0.5 * p.gamma_mhz) <= step);
    CHECK(std::abs(std::abs(grid[static_cast<std::size_t>(hi)]) - 0.5 * p.gamma_mhz) <= step);
}

TEST_CASE("infinite-Doppler derivative does not depend on where the velocity tail starts") {
    TransitionParams p = d1_params();
    p.gamma_mhz = 40.0;
    const auto grid = detuning_grid(-80.0, 80.0, 40.0);
    const Spectrum ref = fmsr_small_modulation(grid, p, InfiniteDoppler{}, {}, unit_mod, {});
    for (double v : {2e4, 2e6}) {
        QuadratureConfig q;
        q.v_max_infinite_m_s = v;
        const Spectrum s = fmsr_small_modulation(grid, p, InfiniteDoppler{}, q, unit_mod, {});
        for (std::size_t i = 0; i < grid.size(); ++i)
            REQUIRE(std::abs(s.signal[i] - ref.signal[i]) <= 1e-4 * rms(ref.signal));
    }
}

TEST_CASE("halving dz changes I_SR by less than 0.5%") {
    const TransitionParams p = d1_params();
    const ResolvedQuadrature r = resolve({}, p);
    QuadratureConfig fine;
    fine.dz_um = 0.5 * r.dz_um;
    fine.wall_start_um = 0.5 * r.wall_start_um;
    const std::vector<double> probes{-100.0, -50.0, 0.0, 50.0, 100.0};
    const auto a = isr_points(probes, p, MaxwellBoltzmann{525.0}, {}, false);
    const auto b = isr_points(probes, p, MaxwellBoltzmann{525.0}, fine, false);
    for (std::size_t i = 0; i < probes.size(); ++i)
        REQUIRE(std::abs(a[i].value - b[i].value) < 0.005 * std::abs(b[i].value));
}

TEST_CASE("cutoff check fails when the cutoff sits inside the first oscillation") {
    const TransitionParams p = d1_params();
    QuadratureConfig q;
    q.z_c_um = p.lambda_um / 4.0;
    const ConvergenceReport bad = convergence_check(p, MaxwellBoltzmann{525.0}, q, 0.0);
    CHECK_FALSE(bad.pass);
    const ConvergenceReport good = convergence_check(p, MaxwellBoltzmann{525.0}, {}, 0.0);
    CHECK(good.pass);
    CHECK(good.rel_delta == std::max(good.rel_zc, good.rel_kc));
}

TEST_CASE("homogeneous broadening far above the Doppler width approaches the motionless limit") {
    TransitionParams p = cs672_params();
    p.c3_mhz_um3 = 0.0;
    p.gamma_mhz = 20000.0;  // k v_p at 300 K is ~290 MHz
    for (double d : {-20000.0, 0.0, 15000.0}) {
        const cplx mb = isr_finite_doppler(d, p, MaxwellBoltzmann{300.0}, {});
        const cplx still = isr_motionless(d, p, {});
        REQUIRE(std::abs(mb - still) < 0.02 * std::abs(still));
    }
}

TEST_CASE("detuning grid construction") {
    CHECK(detuning_grid(-10.0, 10.0, 100.0).size() == 1);
    CHECK(detuning_grid(-10.0, 10.0, 5.0).size() == 5);
    CHECK(detuning_grid(0.0, 1.0, 0.1).back() == Approx(1.0));
    CHECK_THROWS_AS(detuning_grid(0.0, 1.0, 0.0), DomainError);
    const std::vector<double> bad{0.0, 0.0};
    CHECK_THROWS_AS(sr_signal(bad, d1_params(), Motionless{}, {}, {}), DomainError);
}

#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "srcp/oracle.hpp"

using namespace srcp;
using cplx = std::complex<double>;

namespace {

TransitionParams cs672_params() {
    TransitionParams p;
    p.lambda_um = 0.672;
    p.gamma_mhz = 15.0;
    p.c3_mhz_um3 = 0.01;
    return p;
}

}  // namespace

TEST_CASE("oracle and engine agree at line centre in the 672 nm regime") {
    const TransitionParams p = cs672_params();
    const MaxwellBoltzmann mb{500.0};
    const cplx engine = isr_finite_doppler(0.0, p, mb, {});
    OracleConfig cfg;
    cfg.abs_tol = 1e-4 * std::abs(engine);
    const cplx oracle = oracle_isr(0.0, p, mb, cfg);
    CHECK(std::abs(engine - oracle) < 0.005 * std::abs(oracle));
}

TEST_CASE("oracle tends to the motionless result when the line is homogeneously broadened") {
    TransitionParams p = cs672_params();
    p.c3_mhz_um3 = 0.0;
    p.gamma_mhz = 20000.0;
    const cplx still = isr_motionless(5000.0, p, {});
    OracleConfig cfg;
    cfg.abs_tol = 1e-5 * std::abs(still);
    const cplx oracle = oracle_isr(5000.0, p, MaxwellBoltzmann{300.0}, cfg);
    CHECK(std::abs(oracle - still) < 0.02 * std::abs(still));
}

TEST_CASE("tightening the oracle tolerance moves the result by less than the loose tolerance") {
    TransitionParams p = cs672_params();
    p.gamma_mhz = 60.0;  // shorter coherence lengths keep this quick
    const MaxwellBoltzmann mb{500.0};
    const cplx ref = isr_finite_doppler(-30.0, p, mb, {});
    OracleConfig loose;
    loose.abs_tol = 1e-3 * std::abs(ref);
    loose.z_rel_tol = 1e-4;
    loose.inner_rel_tol = 1e-6;
    OracleConfig tight = loose;
    tight.abs_tol = loose.abs_tol / 10.0;
    tight.z_rel_tol = loose.z_rel_tol / 10.0;
    tight.inner_rel_tol = loose.inner_rel_tol / 10.0;
    const cplx a = oracle_isr(-30.0, p, mb, loose);
    const cplx b = oracle_isr(-30.0, p, mb, tight);
    CHECK(std::abs(a - b) < loose.abs_tol);
}

TEST_CASE("oracle configuration is validated and depth exhaustion is reported") {
    const TransitionParams p = cs672_params();
    OracleConfig cfg;
    cfg.abs_tol = 0.0;
    CHECK_THROWS_AS(oracle_isr(0.0, p, MaxwellBoltzmann{500.0}, cfg), DomainError);
    cfg = {};
    cfg.max_depth = 5;
    CHECK_THROWS_AS(oracle_isr(0.0, p, MaxwellBoltzmann{500.0}, cfg), DomainError);
    cfg = {};
    cfg.max_depth = 10;
    cfg.abs_tol = 1e-30;
    try {
        oracle_isr(0.0, p, MaxwellBoltzmann{500.0}, cfg);
        FAIL("expected AccuracyError");
    } catch (const AccuracyError& e) {
        CHECK(std::isfinite(e.error_bound()));
        CHECK(std::abs(e.estimate()) > 0.0);
    }
}

#pragma once

// Slow reference evaluation of the Maxwell-Boltzmann I_SR by nested globally
// adaptive Gauss-Kronrod (G7/K15) quadrature. It shares only the parameter
// types, the cutoff and the coherence exponent with the production engine.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "engine.hpp"
#include "errors.hpp"
#include "params.hpp"
#include "physics.hpp"

namespace srcp {

struct OracleConfig {
    double abs_tol = 1e-7;
    int max_depth = 40;
    double z_span_um = 0.0;   // 0: the engine's default z_max
    double v_span_m_s = 0.0;  // 0: 6 v_p
    double z_rel_tol = 1e-5;       // per-velocity z integral, relative to int |f|
    double inner_rel_tol = 1e-7;   // z' integral; must sit well below z_rel_tol
    QuadratureConfig cutoff;  // only z_c, k_c and z_max are read
};

inline void validate(const OracleConfig& c) {
    if (!(c.abs_tol > 0.0)) throw DomainError("OracleConfig: abs_tol must be > 0");
    if (c.max_depth < 10) throw DomainError("OracleConfig: max_depth must be >= 10");
    if (c.z_span_um < 0.0 || c.v_span_m_s < 0.0) throw DomainError("OracleConfig: negative span");
    if (!(c.inner_rel_tol > 0.0 && c.z_rel_tol > 0.0))
        throw DomainError("OracleConfig: relative tolerances must be > 0");
}

namespace oracle_detail {

struct Segment {
    double a, b;
    cplx value;
    double error;
    double l1;  // K15 estimate of the integral of |f|
    int depth;
    bool operator<(const Segment& o) const { return error < o.error; }
};

/// `sup` bounds |f| on [a, b]; a segment's error is never reported above
/// 2 sup (b - a), which lets bounded but wildly oscillating stretches (the
/// z^-2 phase next to the wall) stop refining once they are too short to matter.
template <class F, class Sup>
Segment gk15(F& f, Sup& sup, double a, double b, int depth) {
    using K = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = K::abscissa();   // x[0] = 0, odd indices are Gauss nodes
    const auto& wk = K::weights();
    const auto& wg = G::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const cplx f0 = f(mid);
    cplx kron = wk[0] * f0;
    cplx gauss = wg[0] * f0;
    double l1 = wk[0] * std::abs(f0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const cplx fl = f(mid - half * x[i]);
        const cplx fr = f(mid + half * x[i]);
        kron += wk[i] * (fl + fr);
        l1 += wk[i] * (std::abs(fl) + std::abs(fr));
        if (i % 2 == 0) gauss += wg[i / 2] * (fl + fr);
    }
    const double err = std::min(std::abs((kron - gauss) * half), 2.0 * sup(a, b) * (b - a));
    return {a, b, kron * half, err, l1 * half, depth};
}

struct Adaptive {
    cplx value;
    double error;
};

/// Global adaptive subdivision: bisect the worst segment until the summed
/// error estimate is below max(abs_tol, l1_rel_tol * int |f|). Measuring the
/// error against int |f| keeps the target reachable when the integral itself
/// cancels down to the noise of nested inner integrals.
template <class F, class Sup>
Adaptive integrate(F f, Sup sup, const std::vector<double>& breaks, double abs_tol, double l1_rel_tol,
                   int max_depth) {
    constexpr std::size_t max_segments = 1u << 20;
    std::priority_queue<Segment> heap;
    cplx total = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Segment s = gk15(f, sup, breaks[i], breaks[i + 1], 0);
        total += s.value;
        error += s.error;
        l1 += s.l1;
        heap.push(s);
    }
    while (!heap.empty() && error > std::max(abs_tol, l1_rel_tol * l1)) {
        const Segment worst = heap.top();
        if (worst.depth >= max_depth || heap.size() >= max_segments)
            throw AccuracyError("oracle: adaptive subdivision exceeded max_depth", total, error);
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const Segment l = gk15(f, sup, worst.a, mid, worst.depth + 1);
        const Segment r = gk15(f, sup, mid, worst.b, worst.depth + 1);
        total += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        l1 += l.l1 + r.l1 - worst.l1;
        heap.push(l);
        heap.push(r);
    }
    // Re-sum to shed the drift of the running updates.
    total = 0.0;
    error = 0.0;
    for (; !heap.empty(); heap.pop()) {
        total += heap.top().value;
        error += heap.top().error;
    }
    return {total, error};
}

inline std::vector<double> uniform_breaks(double a, double b, double step) {
    std::vector<double> out{a};
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
    for (int i = 1; i <= n; ++i) out.push_back(a + (b - a) * i / n);
    return out;
}

}  // namespace oracle_detail

/// I_SR for a Maxwell-Boltzmann vapor,
/// 2 int_0^v_span dv W(v)/v int_0^z_span dz f(z) e^{2ikz} int_0^z dz' exp(coherence_exponent).
/// The outer error estimate is held below abs_tol; the z and z' integrals use
/// the relative tolerances. The z' range is trimmed where the kernel has decayed by e^-25.
inline cplx oracle_isr(double delta_mhz, const TransitionParams& p, const MaxwellBoltzmann& mb,
                       const OracleConfig& cfg) {
    validate(cfg);
    validate(VelocityModel{mb});
    const ResolvedQuadrature cut = resolve(cfg.cutoff, p);
    const double vp = most_probable_velocity(mb.temperature_k, mb.mass_amu);
    const double z_span = cfg.z_span_um > 0.0 ? cfg.z_span_um : cut.z_max_um;
    const double v_span = cfg.v_span_m_s > 0.0 ? cfg.v_span_m_s : 6.0 * vp;
    const double k = p.k_per_um();
    const double lambda = p.lambda_um;
    const double tiny = 1e-300;

    const cplx c3 = p.c3();
    const double c5 = p.c5_mhz_um5;
    auto inner = [&](double z, double v) {
        const double beta = units::two_pi / v;
        // d/dz' of the exponent and its second derivative
        auto d1 = [&](double zp) {
            const double z3 = zp * zp * zp;
            return beta * cplx(0.5 * p.gamma_mhz, -delta_mhz) + cplx(0.0, k) -
                   cplx(0.0, beta) * (c3 / z3 + c5 / (z3 * zp * zp));
        };
        auto d2 = [&](double zp) {
            const double z4 = zp * zp * zp * zp;
            return cplx(0.0, beta) * (3.0 * c3 / z4 + 5.0 * c5 / (z4 * zp * zp));
        };
        auto ratio = [&](double zp) { return std::abs(d2(zp)) / std::norm(d1(zp)); };
        // Next to the wall the phase runs away as 1/z'^2; there the integral
        // over [0, eps] follows from two integrations by parts.
        constexpr double eta = 1e-2;
        double eps = 0.0;
        if (std::abs(c3) > 0.0 || c5 > 0.0) {
            eps = z;
            if (std::abs(c3) > 0.0) eps = std::min(eps, std::sqrt(eta * beta * std::abs(c3) / 3.0));
            if (c5 > 0.0) eps = std::min(eps, std::pow(eta * beta * c5 / 5.0, 0.25));
            while (eps > 0.0 && ratio(eps) > eta) eps *= 0.5;
        }
        const double decay = v / (units::pi * p.gamma_mhz);
        const double lo = std::max({0.0, z - 25.0 * decay, eps});
        cplx head = 0.0;
        if (eps > 0.0 && lo == eps) {
            const cplx a = d1(eps);
            head = std::exp(coherence_exponent(z, eps, v, delta_mhz, p)) * (1.0 / a + d2(eps) / (a * a * a));
        }
        if (lo >= z) return head;
        // Initial pieces span about one decay length or one oscillation of the
        // free exponent, whichever is shorter.
        const double rate = std::abs(beta * (delta_mhz - v / lambda));
        const double period = rate > 0.0 ? units::two_pi / rate : z;
        std::vector<double> br =
            oracle_detail::uniform_breaks(lo, z, std::min(std::max(decay, 0.05 * lambda), period));
        auto g = [&](double zp) { return std::exp(coherence_exponent(z, zp, v, delta_mhz, p)); };
        auto sup = [](double, double) { return 1.0; };  // Re(exponent) <= 0
        return head +
               oracle_detail::integrate(g, sup, br, tiny, cfg.inner_rel_tol, cfg.max_depth).value;
    };
    auto z_integral = [&](double v) {
        auto g = [&](double z) {
            return logistic_cutoff(z, cut.z_c_um, cut.k_c_per_um) * std::exp(cplx(0.0, 2.0 * k * z)) *
                   inner(z, v);
        };
        std::vector<double> br = oracle_detail::uniform_breaks(0.0, z_span, 0.5 * lambda);
        // |inner(z)| <= min(z, v / (pi Gamma))
        auto sup = [&](double, double b) { return std::min(b, v / (units::pi * p.gamma_mhz)); };
        return oracle_detail::integrate(g, sup, br, tiny, cfg.z_rel_tol, cfg.max_depth).value;
    };
    auto v_integrand = [&](double v) { return 2.0 * mb_weight(v, vp) / v * z_integral(v); };

    // Break the velocity range around the Doppler resonance v = -lambda delta.
    std::vector<double> br{0.0};
    const double width = 0.5 * lambda * p.gamma_mhz;
    const double v_res = -lambda * delta_mhz;
    for (double m : {-30.0, -10.0, -3.0, -1.0, 1.0, 3.0, 10.0, 30.0}) {
        const double b = v_res + m * width;
        if (b > br.back() && b < v_span) br.push_back(b);
    }
    for (double b : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0})
        if (b * vp < v_span) br.push_back(b * vp);
    br.push_back(v_span);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    auto no_bound = [](double, double) { return std::numeric_limits<double>::infinity(); };
    return oracle_detail::integrate(v_integrand, no_bound, br, cfg.abs_tol, 0.0, cfg.max_depth).value;
}

}  // namespace srcp

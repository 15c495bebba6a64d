#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cell_kernel.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "physics.hpp"
#include "quadrature.hpp"
#include "units.hpp"

namespace srcp {

using cplx = std::complex<double>;

/// Discretisation knobs. A zero means "derive from the transition".
struct QuadratureConfig {
    double dz_um = 0.0;
    double dz_far_um = 0.0;         // step beyond the reach of the surface potential
    double far_start_um = 0.0;      // where the step starts growing towards dz_far
    double z_c_um = 0.0;
    double k_c_per_um = 0.0;
    double z_max_um = 0.0;
    double wall_start_um = 0.0;     // first cell width next to the wall
    double wall_grading = 0.01;     // near-wall cells are wall_grading * z wide
    double v_panel_m_s = 0.0;       // width of the fine velocity panels
    int v_gauss_points = 4;         // Gauss-Legendre nodes per panel
    double v_growth = 1.25;         // panel growth beyond the resonant range
    double v_max_factor = 6.0;      // Maxwell-Boltzmann upper bound, units of v_p
    double v_max_infinite_m_s = 2e5;
    double convergence_tol = 0.01;
    unsigned threads = 0;
};

/// QuadratureConfig with every knob made concrete for one transition.
struct ResolvedQuadrature {
    double dz_um;
    double dz_far_um;
    double far_start_um;  // the step grows from dz to dz_far beyond here
    double z_c_um;
    double k_c_per_um;
    double z_max_um;
    double wall_start_um;
    double wall_grading;
    double v_panel_m_s;
    int v_gauss_points;
    double v_growth;
    double v_max_factor;
    double v_max_infinite_m_s;
    double convergence_tol;
    unsigned threads;
};

/// Distance where the surface shift equals the homogeneous width, (C3/Gamma)^(1/3),
/// or (C5/Gamma)^(1/5) if that is larger.
inline double probing_depth_um(const TransitionParams& p) {
    return std::max(std::cbrt(std::abs(p.c3()) / p.gamma_mhz),
                    std::pow(p.c5_mhz_um5 / p.gamma_mhz, 0.2));
}

inline ResolvedQuadrature resolve(const QuadratureConfig& q, const TransitionParams& p) {
    validate(p);
    const double lambda = p.lambda_um;
    const double depth = probing_depth_um(p);
    ResolvedQuadrature r{};
    r.dz_um = q.dz_um > 0.0 ? q.dz_um
                            : (depth > 0.0 ? std::min(lambda / 40.0, depth / 5.0) : lambda / 40.0);
    r.dz_far_um = q.dz_far_um > 0.0 ? q.dz_far_um : std::max(r.dz_um, lambda / 20.0);
    r.far_start_um = q.far_start_um > 0.0 ? q.far_start_um : 5.0 * depth;
    r.z_c_um = q.z_c_um > 0.0 ? q.z_c_um : std::max(20.0 * lambda, 5.0 * depth);
    r.k_c_per_um = q.k_c_per_um > 0.0 ? q.k_c_per_um : 2.0 / lambda;
    r.z_max_um = q.z_max_um > 0.0 ? q.z_max_um : r.z_c_um + 10.0 / r.k_c_per_um;
    r.wall_start_um = q.wall_start_um > 0.0 ? q.wall_start_um
                                            : (depth > 0.0 ? std::min(r.dz_um, depth / 100.0) : r.dz_um);
    r.wall_grading = q.wall_grading;
    r.v_panel_m_s = q.v_panel_m_s > 0.0 ? q.v_panel_m_s : 0.5 * lambda * p.gamma_mhz;
    r.v_gauss_points = q.v_gauss_points;
    r.v_growth = q.v_growth;
    r.v_max_factor = q.v_max_factor;
    r.v_max_infinite_m_s = q.v_max_infinite_m_s;
    r.convergence_tol = q.convergence_tol;
    r.threads = q.threads;

    auto fail = [](const std::string& msg) { throw DomainError("QuadratureConfig: " + msg); };
    if (!(r.dz_um > 0.0 && r.dz_um < r.z_c_um && r.z_c_um < r.z_max_um))
        fail("need 0 < dz < z_c < z_max");
    if (r.dz_um > lambda / 8.0) fail("dz must resolve the 2kz phase (dz <= lambda/8)");
    if (!(r.dz_far_um >= r.dz_um && r.dz_far_um <= lambda / 8.0)) fail("need dz <= dz_far <= lambda/8");
    if (!(r.k_c_per_um > 0.0)) fail("k_c must be > 0");
    if (!(r.wall_start_um > 0.0 && r.wall_start_um <= r.dz_um)) fail("need 0 < wall_start <= dz");
    if (!(r.wall_grading > 0.0 && r.wall_grading <= 1.0)) fail("need 0 < wall_grading <= 1");
    if (r.v_gauss_points < 2) fail("v_gauss_points must be >= 2");
    if (!(r.v_growth >= 1.0)) fail("v_growth must be >= 1");
    if (!(r.v_max_factor > 0.0)) fail("v_max_factor must be > 0");
    if (!(r.v_max_infinite_m_s > 0.0)) fail("v_max_infinite_m_s must be > 0");
    if (!(r.convergence_tol > 0.0)) fail("convergence_tol must be > 0");
    if (r.z_max_um / r.dz_um > 5e6) fail("z grid exceeds 5e6 cells");
    return r;
}

/// Exponent of the coherence kernel between z' <= z for an atom leaving the
/// window at speed v:
///   (2 pi / v) [ (Gamma/2 - i(delta - v/lambda)) (z' - z) - i int_z^z' (C3/xi^3 + C5/xi^5) dxi ].
/// The local detuning is delta - v/lambda + C3/z^3 (resonance red-shifted near
/// the wall); with complex C3 the real part is <= 0.
inline cplx coherence_exponent(double z_um, double z_prime_um, double v_m_s, double delta_mhz,
                               const TransitionParams& p) {
    if (!(z_prime_um <= z_um)) throw ContractViolation("coherence_exponent: requires z' <= z");
    if (!(v_m_s > 0.0)) throw DomainError("coherence_exponent: v must be > 0");
    if (z_prime_um == z_um) return {0.0, 0.0};
    const double beta = units::two_pi / v_m_s;
    const cplx local(0.5 * p.gamma_mhz, -(delta_mhz - v_m_s / p.lambda_um));
    const cplx phase = potential_phase_integral(z_um, z_prime_um, p.c3(), p.c5_mhz_um5);
    return beta * (local * (z_prime_um - z_um) - cplx(0.0, 1.0) * phase);
}

namespace detail {

/// Cell edges: wall_start, then widths wall_grading * z up to dz, dz up to
/// far_start, widths growing by 5% per cell up to dz_far, and dz_far up to z_max.
/// Beyond far_start the phase is linear to within the surface shift there, so
/// the wider cells only coarsen the (smooth) cutoff.
inline std::vector<double> cell_edges(const ResolvedQuadrature& r) {
    std::vector<double> edges{0.0, r.wall_start_um};
    double z = r.wall_start_um;
    while (r.wall_grading * z < r.dz_um && z < r.z_max_um) {
        z += r.wall_grading * z;
        edges.push_back(z);
    }
    auto uniform = [&](double step, double until) {
        const auto n = static_cast<std::size_t>(std::floor((until - z) / step + 1e-9));
        const double z0 = z;
        for (std::size_t i = 1; i <= n; ++i) edges.push_back(z0 + static_cast<double>(i) * step);
        z = edges.back();
    };
    uniform(r.dz_um, std::min(std::max(r.far_start_um, z), r.z_max_um));
    for (double h = 1.05 * r.dz_um; h < r.dz_far_um && z + h <= r.z_max_um; h *= 1.05) {
        z += h;
        edges.push_back(z);
    }
    uniform(r.dz_far_um, r.z_max_um);
    return edges;
}

inline ZGrid make_zgrid(const TransitionParams& p, const ResolvedQuadrature& r) {
    ZGrid g;
    g.k = p.k_per_um();
    g.gamma_half = 0.5 * p.gamma_mhz;
    const std::vector<double> edges = cell_edges(r);
    const std::size_t n = edges.size() - 1;
    g.z.resize(n);
    g.f_left.resize(n);
    g.f_slope.resize(n);
    g.phase_left.resize(n);
    g.dq.resize(n);
    g.shape_of.resize(n);
    const cplx c3 = p.c3();
    const double c5 = p.c5_mhz_um5;
    auto shape_for = [&](double h) {
        for (std::size_t i = 0; i < g.shapes.size(); ++i)
            if (g.shapes[i].h == h) return static_cast<std::uint32_t>(i);
        CellShape cs;
        cs.h = h;
        cs.q = cplx(0.0, 2.0 * g.k * h);
        cs.eq = std::exp(cs.q);
        for (int m = 0; m < psi_table_size; ++m) cs.psi_q[static_cast<std::size_t>(m)] = psi_series(m, cs.q);
        g.shapes.push_back(cs);
        return static_cast<std::uint32_t>(g.shapes.size() - 1);
    };
    double f_prev = logistic_cutoff(0.0, r.z_c_um, r.k_c_per_um);
    cplx q_prev = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double z_left = edges[j];
        const double z = edges[j + 1];
        // Uniform cells differ from their step only by rounding; let them share one shape.
        double h = z - z_left;
        for (double step : {r.dz_um, r.dz_far_um})
            if (std::abs(h - step) < 1e-9 * step) h = step;
        const double f = logistic_cutoff(z, r.z_c_um, r.k_c_per_um);
        const cplx qz = potential_antiderivative(z, c3, c5);
        g.z[j] = z;
        g.f_left[j] = f_prev;
        g.f_slope[j] = f - f_prev;
        g.shape_of[j] = shape_for(h);
        g.phase_left[j] = h * std::exp(cplx(0.0, 2.0 * g.k * z_left));
        if (j == 0) {
            const double z3 = z * z * z;
            g.dq[j] = -h * (c3 / z3 + c5 / (z3 * z * z));
        } else {
            g.dq[j] = qz - q_prev;
        }
        f_prev = f;
        q_prev = qz;
    }
    return g;
}

inline double most_negative_detuning(std::span<const double> detunings) {
    double lo = 0.0;
    for (double d : detunings) lo = std::min(lo, d);
    return lo;
}

/// Velocity nodes for one spectrum. Fine panels cover every velocity that can
/// be Doppler-resonant inside the detuning range, v = lambda * (-delta).
inline NodeSet velocity_rule(double v_end, double fine_width, double max_width, double lambda,
                             double delta_min, const ResolvedQuadrature& r) {
    PanelLayout layout;
    layout.fine_width = std::min(fine_width, max_width);
    layout.fine_end = lambda * std::max(0.0, -delta_min) + 4.0 * layout.fine_width;
    layout.growth = r.v_growth;
    layout.max_width = max_width;
    layout.gauss_points = r.v_gauss_points;
    return composite_rule(panel_edges(0.0, v_end, layout), r.v_gauss_points);
}

struct IsrSums {
    std::vector<cplx> value;
    std::vector<cplx> derivative;
};

/// sum_i weight_i * kernel(v_i, delta) for every detuning, in node order.
template <bool WithDerivative>
IsrSums accumulate_velocity(const ZGrid& g, const NodeSet& rule,
                            const std::vector<double>& node_scale,
                            std::span<const double> detunings, unsigned threads,
                            std::size_t first_cell = 0) {
    IsrSums out;
    out.value.assign(detunings.size(), 0.0);
    out.derivative.assign(detunings.size(), 0.0);
    parallel_chunks(detunings.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<cplx> eb;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double v = rule.nodes[i];
            const double scale = node_scale[i];
            if (scale == 0.0) continue;
            potential_factors(g, units::two_pi / v, eb);
            for (std::size_t d = begin; d < end; ++d) {
                const KernelResult kr =
                    velocity_kernel<WithDerivative>(g, v, detunings[d], eb, first_cell);
                out.value[d] += scale * kr.value;
                if constexpr (WithDerivative) out.derivative[d] += scale * kr.derivative;
            }
        }
    });
    return out;
}

}  // namespace detail

/// I_SR and, when requested, dI_SR/d delta at one detuning.
struct IsrPoint {
    cplx value;
    cplx derivative;
};

/// Maxwell-Boltzmann susceptibility integral on a set of detunings:
/// 2 int_0^inf dv W(v)/v int dz f(z) e^{2ikz} int_0^z dz' exp(coherence_exponent).
/// The factor 2 accounts for arriving atoms.
inline std::vector<IsrPoint> isr_finite_doppler_points(std::span<const double> detunings,
                                                       const TransitionParams& p,
                                                       const MaxwellBoltzmann& mb,
                                                       const QuadratureConfig& quad,
                                                       bool with_derivative,
                                                       std::size_t first_cell = 0) {
    validate(VelocityModel{mb});
    const ResolvedQuadrature r = resolve(quad, p);
    const double vp = most_probable_velocity(mb.temperature_k, mb.mass_amu);
    const detail::ZGrid g = detail::make_zgrid(p, r);
    const NodeSet rule =
        detail::velocity_rule(r.v_max_factor * vp, r.v_panel_m_s, 0.25 * vp, p.lambda_um,
                              detail::most_negative_detuning(detunings), r);
    std::vector<double> scale(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i)
        scale[i] = 2.0 * rule.weights[i] * mb_weight(rule.nodes[i], vp);

    const detail::IsrSums sums =
        with_derivative
            ? detail::accumulate_velocity<true>(g, rule, scale, detunings, r.threads, first_cell)
            : detail::accumulate_velocity<false>(g, rule, scale, detunings, r.threads, first_cell);
    std::vector<IsrPoint> out(detunings.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {sums.value[i], sums.derivative[i]};
    return out;
}

inline cplx isr_finite_doppler(double delta_mhz, const TransitionParams& p,
                               const MaxwellBoltzmann& mb, const QuadratureConfig& quad) {
    const double d[1] = {delta_mhz};
    return isr_finite_doppler_points(d, p, mb, quad, false).front().value;
}

/// dI_SR/d delta with the velocity density replaced by its plateau
/// 1/(plateau_speed sqrt(pi)). The integrand falls off as 1/v^2, so beyond
/// v_max_infinite it is integrated in u = 1/v over [0, 1/v_max_infinite],
/// which carries the velocity integral to infinity. Moving that switch to
/// 2 v_max_infinite must change the result by less than convergence_tol,
/// otherwise ConvergenceError is thrown.
inline std::vector<cplx> isr_infinite_doppler_derivative_points(
    std::span<const double> detunings, const TransitionParams& p, const QuadratureConfig& quad,
    const InfiniteDoppler& model = {}) {
    validate(VelocityModel{model});
    const ResolvedQuadrature r = resolve(quad, p);
    const detail::ZGrid g = detail::make_zgrid(p, r);
    const double plateau = 1.0 / (model.plateau_speed_m_s * std::sqrt(units::pi));
    const double v_switch = r.v_max_infinite_m_s;

    PanelLayout layout;
    layout.fine_width = r.v_panel_m_s;
    layout.fine_end = p.lambda_um * std::max(0.0, -detail::most_negative_detuning(detunings)) +
                      4.0 * layout.fine_width;
    layout.growth = r.v_growth;
    std::vector<double> edges = panel_edges(0.0, v_switch, layout);
    PanelLayout segment = layout;
    segment.fine_width = edges.back() - edges[edges.size() - 2];
    segment.fine_end = 0.0;
    const NodeSet main = composite_rule(edges, r.v_gauss_points);
    const NodeSet extra =
        composite_rule(panel_edges(v_switch, 2.0 * v_switch, segment), r.v_gauss_points);
    // u panels graded towards u = 0, where the near-wall phase varies fastest.
    auto tail = [&](double v_from) {
        const double u_end = 1.0 / v_from;
        NodeSet t = composite_rule({0.0, u_end / 256.0, u_end / 64.0, u_end / 16.0, u_end / 4.0, u_end},
                                   r.v_gauss_points);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.weights[i] /= t.nodes[i] * t.nodes[i];
            t.nodes[i] = 1.0 / t.nodes[i];
        }
        return t;
    };
    const NodeSet tail_a = tail(v_switch), tail_b = tail(2.0 * v_switch);

    NodeSet rule;
    std::vector<double> scale_a, scale_b;
    auto append = [&](const NodeSet& part, bool in_a, bool in_b) {
        for (std::size_t i = 0; i < part.size(); ++i) {
            rule.nodes.push_back(part.nodes[i]);
            rule.weights.push_back(part.weights[i]);
            const double w = 2.0 * plateau * part.weights[i];
            scale_a.push_back(in_a ? w : 0.0);
            scale_b.push_back(in_b ? w : 0.0);
        }
    };
    append(tail_a, true, false);
    append(extra, false, true);
    append(tail_b, false, true);
    const auto a_only = detail::accumulate_velocity<true>(g, rule, scale_a, detunings, r.threads);
    const auto b_only = detail::accumulate_velocity<true>(g, rule, scale_b, detunings, r.threads);
    std::vector<double> scale_main(main.size());
    for (std::size_t i = 0; i < main.size(); ++i) scale_main[i] = 2.0 * plateau * main.weights[i];
    const auto common = detail::accumulate_velocity<true>(g, main, scale_main, detunings, r.threads);

    std::vector<cplx> out(detunings.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const cplx a = common.derivative[i] + a_only.derivative[i];
        const cplx b = common.derivative[i] + b_only.derivative[i];
        if (std::abs(b - a) > r.convergence_tol * std::abs(b))
            throw ConvergenceError("infinite-Doppler velocity integral not converged at v_max = " +
                                       std::to_string(v_switch) + " m/s",
                                   a, b);
        out[i] = a;
    }
    return out;
}

inline cplx isr_infinite_doppler_derivative(double delta_mhz, const TransitionParams& p,
                                            const QuadratureConfig& quad,
                                            const InfiniteDoppler& model = {}) {
    const double d[1] = {delta_mhz};
    return isr_infinite_doppler_derivative_points(d, p, quad, model).front();
}

/// Motionless atoms: int dz f(z) e^{2ikz} / (2 pi (Gamma/2 - i(delta + C3/z^3 + C5/z^5)))
/// with complex C3, plus the detuning derivative.
inline IsrPoint isr_motionless_point(double delta_mhz, const TransitionParams& p,
                                     const ResolvedQuadrature& r) {
    const double k = p.k_per_um();
    const cplx c3 = p.c3();
    const double c5 = p.c5_mhz_um5;
    auto resolvent = [&](double z) {
        const double z3 = z * z * z;
        const cplx shift = c3 / z3 + c5 / (z3 * z * z);
        return 1.0 / (units::two_pi * (cplx(0.5 * p.gamma_mhz, -delta_mhz) - cplx(0.0, 1.0) * shift));
    };
    auto weight = [&](double z) {
        return logistic_cutoff(z, r.z_c_um, r.k_c_per_um) * std::exp(cplx(0.0, 2.0 * k * z));
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    // Panels of half a wavelength, refined geometrically towards the wall
    // where the surface shift varies fastest, and around the distance where
    // the shift cancels the detuning.
    const double period = 0.5 * p.lambda_um;
    std::vector<double> br{0.0};
    const double depth = probing_depth_um(p);
    if (depth > 0.0)
        for (double z = depth / 64.0; z < period; z *= 2.0) br.push_back(z);
    if (delta_mhz * p.c3_mhz_um3 < 0.0) {
        const double z_res = std::cbrt(p.c3_mhz_um3 / -delta_mhz);
        for (double f : {0.9, 0.97, 1.0, 1.03, 1.1}) br.push_back(z_res * f);
    }
    for (double a = period; a < r.z_max_um; a += period) br.push_back(a);
    br.push_back(r.z_max_um);
    std::sort(br.begin(), br.end());
    cplx value = 0.0, derivative = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        const double a = br[i];
        const double b = std::min(br[i + 1], r.z_max_um);
        if (!(b > a)) continue;
        value += GK::integrate([&](double z) { return weight(z) * resolvent(z); }, a, b, 15, 1e-9);
        derivative += GK::integrate(
            [&](double z) {
                const cplx R = resolvent(z);
                return weight(z) * cplx(0.0, units::two_pi) * R * R;
            },
            a, b, 15, 1e-9);
    }
    return {value, derivative};
}

inline std::vector<IsrPoint> isr_motionless_points(std::span<const double> detunings,
                                                   const TransitionParams& p,
                                                   const QuadratureConfig& quad) {
    const ResolvedQuadrature r = resolve(quad, p);
    std::vector<IsrPoint> out(detunings.size());
    parallel_chunks(detunings.size(), r.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] = isr_motionless_point(detunings[i], p, r);
    });
    return out;
}

inline cplx isr_motionless(double delta_mhz, const TransitionParams& p,
                           const QuadratureConfig& quad) {
    return isr_motionless_point(delta_mhz, p, resolve(quad, p)).value;
}

/// Dispatch on the velocity model. For InfiniteDoppler only `derivative` is
/// meaningful; `value` is NaN.
inline std::vector<IsrPoint> isr_points(std::span<const double> detunings,
                                        const TransitionParams& p, const VelocityModel& model,
                                        const QuadratureConfig& quad, bool with_derivative) {
    validate(model);
    if (const auto* mb = std::get_if<MaxwellBoltzmann>(&model))
        return isr_finite_doppler_points(detunings, p, *mb, quad, with_derivative);
    if (std::holds_alternative<Motionless>(model)) return isr_motionless_points(detunings, p, quad);
    const auto d = isr_infinite_doppler_derivative_points(detunings, p, quad,
                                                          std::get<InfiniteDoppler>(model));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<IsrPoint> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = {cplx(nan, nan), d[i]};
    return out;
}

}  // namespace srcp

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "params.hpp"
#include "spectrum.hpp"

namespace srcp {

enum class FitParam { c3 = 0, gamma = 1, amplitude = 2, offset = 3, shift = 4 };
inline constexpr std::size_t fit_param_count = 5;
inline constexpr std::array<const char*, fit_param_count> fit_param_names = {
    "c3_mhz_um3", "gamma_mhz", "amplitude", "offset", "shift_mhz"};

using FitVector = std::array<double, fit_param_count>;

inline double& at(FitVector& v, FitParam p) { return v[static_cast<std::size_t>(p)]; }
inline double at(const FitVector& v, FitParam p) { return v[static_cast<std::size_t>(p)]; }

inline FitParam fit_param_from_name(const std::string& name) {
    for (std::size_t i = 0; i < fit_param_count; ++i)
        if (name == fit_param_names[i]) return static_cast<FitParam>(i);
    // Short aliases.
    if (name == "c3") return FitParam::c3;
    if (name == "gamma") return FitParam::gamma;
    if (name == "shift") return FitParam::shift;
    throw DomainError("unknown fit parameter '" + name + "'");
}

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

/// Engine output a fit model produces before amplitude/offset/shift.
enum class FitSignal { Direct, FMSR, FMSRBessel };

/// model(delta) = amplitude * engine(delta - shift; c3, gamma) + offset.
/// The engine runs in arbitrary units; FMSR curves use modulation.amplitude_mhz.
struct FitSpec {
    VelocityModel model = MaxwellBoltzmann{};
    FitSignal signal = FitSignal::FMSR;
    ModulationParams modulation{1.0, 1.0, std::nullopt};
    TransitionParams fixed;
    QuadratureConfig quad;
    std::vector<FitParam> free{FitParam::c3, FitParam::gamma, FitParam::amplitude, FitParam::offset,
                               FitParam::shift};
    FitVector initial{0.0, 1.0, 1.0, 0.0, 0.0};
    std::array<Bounds, fit_param_count> bounds{
        Bounds{0.0, std::numeric_limits<double>::infinity()},
        Bounds{1e-6, std::numeric_limits<double>::infinity()}, Bounds{}, Bounds{}, Bounds{}};

    bool is_free(FitParam p) const { return std::find(free.begin(), free.end(), p) != free.end(); }
};

inline void validate(const FitSpec& s) {
    validate(s.model);
    if (s.signal == FitSignal::Direct && std::holds_alternative<InfiniteDoppler>(s.model))
        throw UnsupportedModel("the infinite-Doppler model only fits FMSR (derivative) data");
    if (s.signal == FitSignal::FMSRBessel && std::holds_alternative<InfiniteDoppler>(s.model))
        throw UnsupportedModel("the sideband sum is not available for the infinite-Doppler model");
    for (std::size_t i = 0; i < fit_param_count; ++i) {
        const Bounds& b = s.bounds[i];
        if (!(b.lo <= b.hi)) throw DomainError(std::string("fit bounds inverted for ") + fit_param_names[i]);
        if (!(s.initial[i] >= b.lo && s.initial[i] <= b.hi))
            throw DomainError(std::string("initial value outside bounds for ") + fit_param_names[i]);
    }
    if (!(s.bounds[0].lo >= 0.0)) throw DomainError("c3 lower bound must be >= 0");
    if (!(s.bounds[1].lo > 0.0)) throw DomainError("gamma lower bound must be > 0");
    for (FitParam p : s.free)
        if ((p == FitParam::c3 || p == FitParam::gamma || p == FitParam::shift) &&
            !(std::isfinite(s.bounds[static_cast<std::size_t>(p)].lo) &&
              std::isfinite(s.bounds[static_cast<std::size_t>(p)].hi)))
            throw DomainError(std::string("free nonlinear parameter needs finite bounds: ") +
                              fit_param_names[static_cast<std::size_t>(p)]);
}

namespace fit_detail {

/// Cubic Lagrange interpolation on a sorted, possibly non-uniform grid.
inline double cubic_at(const std::vector<double>& x, const std::vector<double>& y, double t) {
    const std::size_t n = x.size();
    if (n == 1) return y[0];
    if (n < 4) {
        const auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - x.begin(), 1, n - 1));
        const double w = (t - x[i - 1]) / (x[i] - x[i - 1]);
        return y[i - 1] + w * (y[i] - y[i - 1]);
    }
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    std::ptrdiff_t i = (it - x.begin()) - 2;
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 4);
    double sum = 0.0;
    for (std::ptrdiff_t a = i; a < i + 4; ++a) {
        double l = 1.0;
        for (std::ptrdiff_t b = i; b < i + 4; ++b)
            if (b != a) l *= (t - x[static_cast<std::size_t>(b)]) / (x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(b)]);
        sum += l * y[static_cast<std::size_t>(a)];
    }
    return sum;
}

}  // namespace fit_detail

/// Quadrature with every derived knob pinned, so that engine curves vary
/// smoothly with (c3, gamma) instead of jumping when a grid count changes.
/// Steps come from the initial (c3, gamma); the cutoff and the fine-step
/// region cover the largest probing depth the bounds allow.
inline QuadratureConfig freeze_quadrature(const FitSpec& s) {
    TransitionParams p = s.fixed;
    p.c3_mhz_um3 = at(s.initial, FitParam::c3);
    p.gamma_mhz = at(s.initial, FitParam::gamma);
    const ResolvedQuadrature r = resolve(s.quad, p);
    QuadratureConfig q = s.quad;
    q.dz_um = r.dz_um;
    q.dz_far_um = r.dz_far_um;
    q.wall_start_um = r.wall_start_um;
    q.v_panel_m_s = r.v_panel_m_s;
    q.k_c_per_um = r.k_c_per_um;
    TransitionParams deep = p;
    if (s.is_free(FitParam::c3) && std::isfinite(s.bounds[0].hi)) deep.c3_mhz_um3 = s.bounds[0].hi;
    if (s.is_free(FitParam::gamma)) deep.gamma_mhz = s.bounds[1].lo;
    const double deep_depth = probing_depth_um(deep);
    q.z_c_um = s.quad.z_c_um > 0.0 ? r.z_c_um : std::max(r.z_c_um, 5.0 * deep_depth);
    q.far_start_um = s.quad.far_start_um > 0.0 ? r.far_start_um : std::max(r.far_start_um, 5.0 * deep_depth);
    q.z_max_um = s.quad.z_max_um > 0.0 ? std::max(s.quad.z_max_um, q.z_c_um + 10.0 / q.k_c_per_um)
                                       : q.z_c_um + 10.0 / q.k_c_per_um;
    return q;
}

/// Engine curves for a fit, cached by (c3, gamma). Curves are computed on the
/// data grid extended at both ends far enough to cover every allowed shift.
class CurveModel {
  public:
    CurveModel(FitSpec spec, std::vector<double> detunings)
        : spec_(std::move(spec)), data_grid_(std::move(detunings)) {
        validate(spec_);
        validate_detunings(data_grid_);
        spec_.quad = freeze_quadrature(spec_);
        const Bounds& sb = spec_.bounds[static_cast<std::size_t>(FitParam::shift)];
        double reach = std::abs(at(spec_.initial, FitParam::shift));
        if (spec_.is_free(FitParam::shift)) reach = std::max({reach, std::abs(sb.lo), std::abs(sb.hi)});
        const std::size_t n = data_grid_.size();
        const double step_lo = n > 1 ? data_grid_[1] - data_grid_[0] : 1.0;
        const double step_hi = n > 1 ? data_grid_[n - 1] - data_grid_[n - 2] : 1.0;
        const int pad_lo = reach > 0.0 ? static_cast<int>(std::ceil(reach / step_lo)) + 2 : 0;
        const int pad_hi = reach > 0.0 ? static_cast<int>(std::ceil(reach / step_hi)) + 2 : 0;
        for (int i = pad_lo; i >= 1; --i) grid_.push_back(data_grid_.front() - i * step_lo);
        offset_ = grid_.size();
        grid_.insert(grid_.end(), data_grid_.begin(), data_grid_.end());
        for (int i = 1; i <= pad_hi; ++i) grid_.push_back(data_grid_.back() + i * step_hi);
    }

    const FitSpec& spec() const { return spec_; }
    const std::vector<double>& data_grid() const { return data_grid_; }
    const std::vector<double>& grid() const { return grid_; }
    std::size_t engine_calls() const { return engine_calls_; }
    /// Index of the first data detuning within grid().
    std::size_t data_offset() const { return offset_; }

    /// Engine signal on grid() for the given (c3, gamma).
    const std::vector<double>& base_curve(double c3, double gamma) {
        const auto key = std::make_pair(c3, gamma);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        if (cache_.size() >= 4096) cache_.clear();
        ++engine_calls_;
        return cache_.emplace(key, compute(c3, gamma)).first->second;
    }

    /// Pre-seeds the cache, e.g. from a curve library.
    void insert(double c3, double gamma, std::vector<double> curve) {
        if (curve.size() != grid_.size()) throw ContractViolation("CurveModel::insert: grid size mismatch");
        cache_[std::make_pair(c3, gamma)] = std::move(curve);
    }

    /// engine(delta_i - shift) on the data grid. shift == 0 returns the cached
    /// values exactly.
    std::vector<double> shifted(double c3, double gamma, double shift) {
        const std::vector<double>& base = base_curve(c3, gamma);
        std::vector<double> out(data_grid_.size());
        if (shift == 0.0) {
            std::copy(base.begin() + static_cast<std::ptrdiff_t>(offset_),
                      base.begin() + static_cast<std::ptrdiff_t>(offset_ + out.size()), out.begin());
            return out;
        }
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = fit_detail::cubic_at(grid_, base, data_grid_[i] - shift);
        return out;
    }

    /// amplitude * engine(delta - shift) + offset on the data grid.
    std::vector<double> evaluate(const FitVector& theta) {
        std::vector<double> out = shifted(at(theta, FitParam::c3), at(theta, FitParam::gamma),
                                          at(theta, FitParam::shift));
        const double a = at(theta, FitParam::amplitude);
        const double b = at(theta, FitParam::offset);
        for (double& y : out) y = a * y + b;
        return out;
    }

    /// The engine spectrum behind base_curve, for any grid.
    Spectrum engine_spectrum(double c3, double gamma, std::span<const double> grid) const {
        TransitionParams p = spec_.fixed;
        p.c3_mhz_um3 = c3;
        p.gamma_mhz = gamma;
        const NormalizationInfo norm{};
        switch (spec_.signal) {
            case FitSignal::Direct: return sr_signal(grid, p, spec_.model, spec_.quad, norm);
            case FitSignal::FMSR:
                return fmsr_small_modulation(grid, p, spec_.model, spec_.quad, spec_.modulation, norm);
            case FitSignal::FMSRBessel:
                return fmsr_bessel(grid, p, spec_.model, spec_.quad, spec_.modulation, norm);
        }
        throw ContractViolation("unknown fit signal");
    }

  private:
    std::vector<double> compute(double c3, double gamma) const {
        return engine_spectrum(c3, gamma, grid_).signal;
    }

    FitSpec spec_;
    std::vector<double> data_grid_;
    std::vector<double> grid_;
    std::size_t offset_ = 0;
    std::map<std::pair<double, double>, std::vector<double>> cache_;
    std::size_t engine_calls_ = 0;
};

/// One-shot model evaluation; prefer CurveModel when evaluating repeatedly.
inline std::vector<double> model_curve(const FitSpec& spec, const FitVector& theta,
                                       std::span<const double> detunings) {
    CurveModel m(spec, std::vector<double>(detunings.begin(), detunings.end()));
    return m.evaluate(theta);
}

enum class Optimizer { NelderMead, LevenbergMarquardt };

struct FitOptions {
    Optimizer method = Optimizer::NelderMead;
    int max_evaluations = 600;  // objective evaluations per optimizer run
    int restarts = 2;
    std::uint64_t seed = 20240521;
    double xtol = 1e-7;  // in units of each parameter's bound range
    double ftol = 1e-10;
    double gtol = 1e-3;  // max cosine between the residual and a Jacobian column
};

struct FitResult {
    FitVector best{};
    std::vector<FitParam> free;
    double residual_norm = 0.0;  // root-mean-square residual
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    double gradient_proxy = 0.0;
    std::vector<std::vector<double>> covariance_proxy;  // J^T J over the free nonlinear parameters
    std::string method;
    std::string message;
};

namespace fit_detail {

/// Least-squares problem in the nonlinear parameters, with free amplitude and
/// offset solved linearly (and clamped to their bounds) at every evaluation.
class Problem {
  public:
    Problem(CurveModel& model, std::span<const double> data) : model_(model), data_(data.begin(), data.end()) {
        const FitSpec& s = model.spec();
        for (FitParam p : {FitParam::c3, FitParam::gamma, FitParam::shift})
            if (s.is_free(p)) nonlinear_.push_back(p);
        free_amp_ = s.is_free(FitParam::amplitude);
        free_off_ = s.is_free(FitParam::offset);
    }

    std::size_t dim() const { return nonlinear_.size(); }
    const std::vector<FitParam>& nonlinear() const { return nonlinear_; }
    int evaluations() const { return evaluations_; }

    const Bounds& bound(std::size_t i) const {
        return model_.spec().bounds[static_cast<std::size_t>(nonlinear_[i])];
    }

    /// Scaled coordinates in [0, 1] per nonlinear parameter.
    std::vector<double> to_unit(const FitVector& theta) const {
        std::vector<double> u(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            const Bounds& b = bound(i);
            u[i] = b.hi > b.lo ? (at(theta, nonlinear_[i]) - b.lo) / (b.hi - b.lo) : 0.0;
        }
        return u;
    }

    FitVector from_unit(const std::vector<double>& u) const {
        FitVector theta = model_.spec().initial;
        for (std::size_t i = 0; i < dim(); ++i) {
            const Bounds& b = bound(i);
            at(theta, nonlinear_[i]) = b.lo + std::clamp(u[i], 0.0, 1.0) * (b.hi - b.lo);
        }
        return theta;
    }

    /// Fills the linear parameters of theta and returns the residual vector.
    std::vector<double> residuals(FitVector& theta) {
        ++evaluations_;
        const std::vector<double> g = model_.shifted(at(theta, FitParam::c3), at(theta, FitParam::gamma),
                                                     at(theta, FitParam::shift));
        solve_linear(g, theta);
        const double a = at(theta, FitParam::amplitude);
        const double b = at(theta, FitParam::offset);
        std::vector<double> r(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) r[i] = data_[i] - (a * g[i] + b);
        return r;
    }

    double objective(const std::vector<double>& u, FitVector* out = nullptr) {
        FitVector theta = from_unit(u);
        const std::vector<double> r = residuals(theta);
        double s = 0.0;
        for (double x : r) s += x * x;
        if (out) *out = theta;
        return s;
    }

  private:
    void solve_linear(const std::vector<double>& g, FitVector& theta) const {
        const FitSpec& s = model_.spec();
        const Bounds& ab = s.bounds[static_cast<std::size_t>(FitParam::amplitude)];
        const Bounds& ob = s.bounds[static_cast<std::size_t>(FitParam::offset)];
        const double n = static_cast<double>(g.size());
        double sg = 0.0, sy = 0.0, sgg = 0.0, sgy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            sg += g[i];
            sy += data_[i];
            sgg += g[i] * g[i];
            sgy += g[i] * data_[i];
        }
        double a = at(theta, FitParam::amplitude);
        double b = at(theta, FitParam::offset);
        if (free_amp_ && free_off_) {
            const double det = n * sgg - sg * sg;
            if (det > 1e-300 * std::max(1.0, n * sgg)) a = (n * sgy - sg * sy) / det;
            a = std::clamp(a, ab.lo, ab.hi);
            b = std::clamp((sy - a * sg) / n, ob.lo, ob.hi);
        } else if (free_amp_) {
            if (sgg > 0.0) a = (sgy - b * sg) / sgg;
            a = std::clamp(a, ab.lo, ab.hi);
        } else if (free_off_) {
            b = std::clamp((sy - a * sg) / n, ob.lo, ob.hi);
        }
        at(theta, FitParam::amplitude) = a;
        at(theta, FitParam::offset) = b;
    }

    CurveModel& model_;
    std::vector<double> data_;
    std::vector<FitParam> nonlinear_;
    bool free_amp_ = false, free_off_ = false;
    int evaluations_ = 0;
};

struct RunResult {
    std::vector<double> u;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline RunResult nelder_mead(Problem& prob, std::vector<double> start, double step, const FitOptions& opt,
                             std::mt19937_64& rng) {
    const std::size_t n = prob.dim();
    std::vector<std::vector<double>> x(n + 1, start);
    std::bernoulli_distribution flip(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        double s = flip(rng) ? step : -step;
        if (start[i] + s > 1.0 || start[i] + s < 0.0) s = -s;
        x[i + 1][i] = std::clamp(start[i] + s, 0.0, 1.0);
    }
    auto clamp_unit = [](std::vector<double>& v) {
        for (double& c : v) c = std::clamp(c, 0.0, 1.0);
    };
    std::vector<double> f(n + 1);
    for (std::size_t i = 0; i <= n; ++i) f[i] = prob.objective(x[i]);
    const int budget_start = prob.evaluations();
    RunResult res;
    std::vector<std::size_t> order(n + 1);
    while (true) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        double fspread = 0.0, xspread = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            fspread = std::max(fspread, std::abs(f[i] - f[best]));
            for (std::size_t c = 0; c < n; ++c) xspread = std::max(xspread, std::abs(x[i][c] - x[best][c]));
        }
        const double floor = 1e-300;
        if (fspread <= opt.ftol * std::abs(f[best]) + floor && xspread <= opt.xtol) {
            res.converged = true;
        }
        if (res.converged || prob.evaluations() - budget_start >= opt.max_evaluations) {
            res.u = x[best];
            res.f = f[best];
            return res;
        }
        ++res.iterations;
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t c = 0; c < n; ++c) centroid[c] += x[i][c] / static_cast<double>(n);
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t c = 0; c < n; ++c) p[c] = centroid[c] + t * (x[worst][c] - centroid[c]);
            clamp_unit(p);
            return p;
        };
        std::vector<double> xr = along(-1.0);
        const double fr = prob.objective(xr);
        if (fr < f[best]) {
            std::vector<double> xe = along(-2.0);
            const double fe = prob.objective(xe);
            if (fe < fr) {
                x[worst] = xe;
                f[worst] = fe;
            } else {
                x[worst] = xr;
                f[worst] = fr;
            }
        } else if (fr < f[second]) {
            x[worst] = xr;
            f[worst] = fr;
        } else {
            const bool outside = fr < f[worst];
            std::vector<double> xc = along(outside ? -0.5 : 0.5);
            const double fc = prob.objective(xc);
            if (fc < (outside ? fr : f[worst])) {
                x[worst] = xc;
                f[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t c = 0; c < n; ++c) x[i][c] = x[best][c] + 0.5 * (x[i][c] - x[best][c]);
                    f[i] = prob.objective(x[i]);
                }
            }
        }
    }
}

/// Forward-difference Jacobian of the residuals in unit coordinates. Steps
/// point inward at the bounds.
inline Eigen::MatrixXd jacobian(Problem& prob, const std::vector<double>& u, const std::vector<double>& r0,
                                double h = 1e-6) {
    const std::size_t n = prob.dim();
    Eigen::MatrixXd J(static_cast<Eigen::Index>(r0.size()), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> up = u;
        const double step = u[c] + h <= 1.0 ? h : -h;
        up[c] += step;
        FitVector theta = prob.from_unit(up);
        const std::vector<double> r = prob.residuals(theta);
        for (std::size_t i = 0; i < r.size(); ++i)
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (r[i] - r0[i]) / step;
    }
    return J;
}

inline RunResult levenberg_marquardt(Problem& prob, std::vector<double> u, const FitOptions& opt) {
    const std::size_t n = prob.dim();
    RunResult res;
    FitVector theta = prob.from_unit(u);
    std::vector<double> r = prob.residuals(theta);
    auto sumsq = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return s;
    };
    double f = sumsq(r);
    double lambda = 1e-3;
    const int budget_start = prob.evaluations();
    while (prob.evaluations() - budget_start < opt.max_evaluations) {
        ++res.iterations;
        const Eigen::MatrixXd J = jacobian(prob, u, r);
        const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * rv;
        bool improved = false;
        while (prob.evaluations() - budget_start < opt.max_evaluations) {
            Eigen::MatrixXd Ad = A;
            for (Eigen::Index i = 0; i < Ad.rows(); ++i) Ad(i, i) += lambda * std::max(A(i, i), 1e-30);
            // r = data - model, so the model Jacobian is -J.
            const Eigen::VectorXd delta = Ad.ldlt().solve(-g);
            std::vector<double> un = u;
            for (std::size_t c = 0; c < n; ++c)
                un[c] = std::clamp(u[c] + delta(static_cast<Eigen::Index>(c)), 0.0, 1.0);
            FitVector tn = prob.from_unit(un);
            std::vector<double> rn = prob.residuals(tn);
            const double fn = sumsq(rn);
            double move = 0.0;
            for (std::size_t c = 0; c < n; ++c) move = std::max(move, std::abs(un[c] - u[c]));
            if (fn < f) {
                const bool small = (f - fn) <= opt.ftol * f || move <= opt.xtol;
                u = un;
                r = rn;
                f = fn;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (small) res.converged = true;
                break;
            }
            if (move <= opt.xtol) {
                res.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) {
                res.converged = true;
                break;
            }
        }
        if (res.converged || !improved) break;
    }
    res.u = u;
    res.f = f;
    return res;
}

}  // namespace fit_detail

/// Least-squares fit of `data` on the model's data grid.
/// Nelder-Mead restarts from the best point with a fresh, randomly oriented
/// simplex (seeded) until a restart no longer improves the objective.
inline FitResult fit(CurveModel& model, std::span<const double> data, const FitOptions& opt = {}) {
    if (data.size() != model.data_grid().size())
        throw DomainError("fit: data and detuning grid differ in length");
    for (double y : data)
        if (!std::isfinite(y)) throw DomainError("fit: data contains a non-finite value");
    fit_detail::Problem prob(model, data);
    const FitSpec& spec = model.spec();
    FitResult out;
    out.free = spec.free;
    out.method = opt.method == Optimizer::NelderMead ? "nelder_mead" : "levenberg_marquardt";

    std::vector<double> u = prob.to_unit(spec.initial);
    bool converged = true;
    int iterations = 0;
    try {
        if (prob.dim() > 0) {
            std::mt19937_64 rng(opt.seed);
            fit_detail::RunResult run;
            if (opt.method == Optimizer::NelderMead) {
                run = fit_detail::nelder_mead(prob, u, 0.05, opt, rng);
                iterations += run.iterations;
                for (int k = 0; k < opt.restarts; ++k) {
                    fit_detail::RunResult again = fit_detail::nelder_mead(prob, run.u, 0.01, opt, rng);
                    iterations += again.iterations;
                    const bool better = again.f < run.f * (1.0 - 1e-9);
                    if (again.f <= run.f) run = again;
                    if (!better) break;
                }
            } else {
                run = fit_detail::levenberg_marquardt(prob, u, opt);
                iterations += run.iterations;
            }
            u = run.u;
            converged = run.converged;
        }
    } catch (const Error& e) {
        out.message = e.what();
        converged = false;
    }

    FitVector theta = prob.from_unit(u);
    std::vector<double> r = prob.residuals(theta);
    double ss = 0.0;
    for (double x : r) ss += x * x;
    out.best = theta;
    out.residual_norm = std::sqrt(ss / static_cast<double>(r.size()));
    out.iterations = iterations;

    // Gradient proxy: largest |cos| between the residual and a Jacobian column,
    // skipping parameters pinned at a bound with the gradient pointing outward.
    // A residual at rounding level carries no direction, so its cosine is not tested.
    double dd = 0.0;
    for (double y : data) dd += y * y;
    double proxy = 0.0;
    if (prob.dim() > 0 && ss > 0.0) {
        const Eigen::MatrixXd J = fit_detail::jacobian(prob, u, r);
        const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
        const Eigen::VectorXd g = J.transpose() * rv;  // = -(1/2) d(ss)/du
        for (std::size_t c = 0; c < prob.dim(); ++c) {
            const double gc = g(static_cast<Eigen::Index>(c));
            const double norm = J.col(static_cast<Eigen::Index>(c)).norm() * rv.norm();
            if (norm == 0.0) continue;
            if ((u[c] <= 0.0 && gc < 0.0) || (u[c] >= 1.0 && gc > 0.0)) continue;
            if (ss > 1e-24 * dd) proxy = std::max(proxy, std::abs(gc) / norm);
        }
        const Eigen::MatrixXd A = J.transpose() * J;
        out.covariance_proxy.assign(prob.dim(), std::vector<double>(prob.dim()));
        for (std::size_t a = 0; a < prob.dim(); ++a)
            for (std::size_t b = 0; b < prob.dim(); ++b)
                out.covariance_proxy[a][b] = A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    out.gradient_proxy = proxy;
    out.evaluations = prob.evaluations();
    out.converged = converged && proxy <= opt.gtol;
    if (out.message.empty() && !out.converged)
        out.message = converged ? "gradient proxy above tolerance" : "evaluation budget exhausted";
    return out;
}

inline FitResult fit(const Spectrum& data, const FitSpec& spec, const FitOptions& opt = {}) {
    CurveModel model(spec, data.detunings);
    return fit(model, data.signal, opt);
}

}  // namespace srcp

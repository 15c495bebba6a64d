#pragma once

// Cumulative z/z' integration for one velocity class.
//
// With phi(z) = (2 pi / v) [ (Gamma/2 - i(delta - v/lambda)) z + i Q(z) ] the
// coherence kernel factorises as exp(phi(z') - phi(z)), so the inner integral
// H(z) = int_0^z exp(phi(z') - phi(z)) dz' obeys the one-step recursion
//
//   H_j = e^{-sigma_j} H_{j-1} + int_cell exp(phi(z') - phi(z_j)) dz',
//
// sigma_j = phi(z_j) - phi(z_{j-1}). Re(sigma_j) >= 0, so |e^{-sigma_j}| <= 1 and
// the recursion never overflows however slow the atoms are. Inside a cell phi
// is taken linear and the cutoff f_log linear; the cell integrals of H and of
// f_log(z) e^{2ikz} H(z) are then exact in closed form. The detuning
// derivative is propagated alongside (d sigma / d delta = -2 pi i h / v).

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace srcp::detail {

using cplx = std::complex<double>;

inline constexpr int psi_table_size = 16;

/// psi_n(w) = int_0^1 x^n e^{w x} dx by its power series.
inline cplx psi_series(int n, cplx w, int terms = 40) {
    cplx sum = 0.0;
    cplx wm = 1.0;
    double fact = 1.0;
    for (int m = 0; m < terms; ++m) {
        if (m > 0) {
            wm *= w;
            fact *= m;
        }
        sum += wm / (fact * (n + m + 1));
    }
    return sum;
}

struct Psi012 {
    cplx p0, p1, p2;
};

/// psi_0..2(w) given ew = e^w.
inline Psi012 psi012(cplx w, cplx ew) {
    if (std::norm(w) < 0.05 * 0.05) {
        // 9 terms: 0.05^9 / 9! < 1e-17; above the threshold the closed forms
        // lose at most eps / |w|^3 ~ 1e-12 to cancellation.
        static const auto coef = [] {
            std::array<std::array<double, 9>, 3> c{};
            double fact = 1.0;
            for (int m = 0; m < 9; ++m) {
                if (m > 0) fact *= m;
                for (int n = 0; n < 3; ++n) c[n][m] = 1.0 / (fact * (n + m + 1));
            }
            return c;
        }();
        cplx s0 = coef[0][8], s1 = coef[1][8], s2 = coef[2][8];
        for (int m = 7; m >= 0; --m) {
            s0 = s0 * w + coef[0][m];
            s1 = s1 * w + coef[1][m];
            s2 = s2 * w + coef[2][m];
        }
        return {s0, s1, s2};
    }
    const cplx inv = 1.0 / w;
    const cplx p0 = (ew - 1.0) * inv;
    const cplx p1 = (ew - p0) * inv;
    const cplx p2 = (ew - 2.0 * p1) * inv;
    return {p0, p1, p2};
}

/// Constants of one cell width.
struct CellShape {
    double h = 0.0;  // um
    cplx q;          // 2 i k h
    cplx eq;         // e^q
    std::array<cplx, psi_table_size> psi_q{};  // psi_n(q)
};

/// Per-grid constants shared by every velocity and detuning. Cells next to the
/// wall are graded; the rest share one width.
struct ZGrid {
    double k = 0.0;                // 2 pi / lambda, 1/um
    double gamma_half = 0.0;       // Gamma / 2, MHz
    std::vector<double> z;         // right edge of each cell, um
    std::vector<double> f_left;    // cutoff at the left edge
    std::vector<double> f_slope;   // cutoff increment across the cell
    std::vector<cplx> phase_left;  // h * e^{2 i k z_left}
    std::vector<cplx> dq;          // Q(z_j) - Q(z_{j-1}); first cell uses h Q'(z_1)
    std::vector<std::uint32_t> shape_of;
    std::vector<CellShape> shapes;

    std::size_t cells() const { return z.size(); }
};

struct KernelResult {
    cplx value;
    cplx derivative;
};

/// Velocity-dependent factors e^{-i beta dq_j}, beta = 2 pi / v.
inline void potential_factors(const ZGrid& g, double beta, std::vector<cplx>& out) {
    out.resize(g.cells());
    const cplx ib(0.0, beta);
    for (std::size_t j = 0; j < g.cells(); ++j) out[j] = std::exp(-ib * g.dq[j]);
}

/// (1/v) int_0^zmax dz f(z) e^{2ikz} H(z) and its detuning derivative.
///
/// `first_cell` drops the outer contribution of cells before it (the inner
/// recursion still runs over them); used to audit the near-wall cells.
template <bool WithDerivative>
KernelResult velocity_kernel(const ZGrid& g, double v, double delta,
                             const std::vector<cplx>& eb, std::size_t first_cell = 0) {
    const double beta = 2.0 * M_PI / v;
    const cplx ib(0.0, beta);
    const cplx rate = beta * cplx(g.gamma_half, -delta) + cplx(0.0, g.k);  // sigma per um
    std::vector<cplx> ea(g.shapes.size());
    for (std::size_t i = 0; i < ea.size(); ++i) ea[i] = std::exp(-rate * g.shapes[i].h);

    cplx H = 0.0, dH = 0.0;
    cplx acc = 0.0, dacc = 0.0;

    for (std::size_t j = 0; j < g.cells(); ++j) {
        const CellShape& cs = g.shapes[g.shape_of[j]];
        const double h = cs.h;
        const cplx s(0.0, -beta * h);  // d sigma / d delta
        const cplx sigma = rate * h + ib * g.dq[j];
        const cplx E = ea[g.shape_of[j]] * eb[j];
        const cplx w = cs.q - sigma;
        const Psi012 pw = psi012(w, cs.eq * E);

        cplx P, dP, D0, D1, dD0, dD1;
        if (std::norm(sigma) < 0.01 * 0.01) {
            // (1 - e^{-s})/s and (psi_n(q) - psi_n(q - s))/s as series in s
            P = 0.0;
            D0 = 0.0;
            D1 = 0.0;
            dP = 0.0;
            dD0 = 0.0;
            dD1 = 0.0;
            cplx sm = 1.0;    // (-sigma)^m
            cplx sm1 = 0.0;   // m (-1)^m sigma^(m-1)
            double fact = 1.0;  // (m+1)!
            for (int m = 0; m < 6; ++m) {  // 0.01^6 / 7! < 1e-15
                fact *= (m + 1);
                const double c = 1.0 / fact;
                P += c * sm;
                D0 += c * sm * cs.psi_q[static_cast<std::size_t>(1 + m)];
                D1 += c * sm * cs.psi_q[static_cast<std::size_t>(2 + m)];
                if constexpr (WithDerivative) {
                    dP += c * sm1;
                    dD0 += c * sm1 * cs.psi_q[static_cast<std::size_t>(1 + m)];
                    dD1 += c * sm1 * cs.psi_q[static_cast<std::size_t>(2 + m)];
                }
                sm1 = -(sm + sigma * sm1);  // d/dsigma of (-sigma)^(m+1)
                sm *= -sigma;
            }
        } else {
            const cplx inv = 1.0 / sigma;
            P = (1.0 - E) * inv;
            D0 = (cs.psi_q[0] - pw.p0) * inv;
            D1 = (cs.psi_q[1] - pw.p1) * inv;
            if constexpr (WithDerivative) {
                dP = (E - P) * inv;
                dD0 = (pw.p1 - D0) * inv;
                dD1 = (pw.p2 - D1) * inv;
            }
        }

        const double f0 = g.f_left[j];
        const double df = g.f_slope[j];
        const cplx inner = f0 * pw.p0 + df * pw.p1;
        if (j >= first_cell) {
            acc += g.phase_left[j] * (H * inner + h * (f0 * D0 + df * D1));
            if constexpr (WithDerivative) {
                const cplx d_inner = -(f0 * pw.p1 + df * pw.p2) * s;
                dacc += g.phase_left[j] *
                        (dH * inner + H * d_inner + h * (f0 * dD0 + df * dD1) * s);
            }
        }
        if constexpr (WithDerivative) dH = E * (dH - s * H) + h * dP * s;
        H = E * H + h * P;
    }
    return {acc / v, dacc / v};
}

}  // namespace srcp::detail

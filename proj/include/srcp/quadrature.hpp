#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace srcp {

struct NodeSet {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline NodeSet gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: order must be >= 1");
    NodeSet rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    const unsigned un = static_cast<unsigned>(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const double p = std::legendre(un, x);
            const double pm1 = n > 1 ? std::legendre(un - 1, x) : 1.0;
            dp = n * (x * p - pm1) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double p = std::legendre(un, x);
        const double pm1 = n > 1 ? std::legendre(un - 1, x) : 1.0;
        dp = n * (x * p - pm1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return rule;
}

/// Layout of composite Gauss-Legendre panels over [0, end].
///
/// Panels have constant width `fine_width` up to `fine_end`, then grow
/// geometrically by `growth` per panel up to `max_width`.
struct PanelLayout {
    double fine_width = 1.0;
    double fine_end = 0.0;
    double growth = 1.25;
    double max_width = std::numeric_limits<double>::infinity();
    int gauss_points = 4;
};

/// Panel edges covering [start, end]; the widths continue from `width`.
inline std::vector<double> panel_edges(double start, double end, const PanelLayout& layout) {
    std::vector<double> edges{start};
    double edge = start;
    double width = layout.fine_width;
    while (edge < end) {
        if (edge >= layout.fine_end) width = std::min(width * layout.growth, layout.max_width);
        double next = edge + width;
        // Never leave a sliver shorter than a fifth of a panel at the end.
        if (next > end || end - next < 0.2 * width) next = end;
        edges.push_back(next);
        edge = next;
    }
    return edges;
}

/// Composite rule for integral_{edges.front()}^{edges.back()} g(v) dv.
inline NodeSet composite_rule(const std::vector<double>& edges, int gauss_points) {
    const NodeSet ref = gauss_legendre(gauss_points);
    NodeSet rule;
    rule.nodes.reserve((edges.size() - 1) * ref.size());
    rule.weights.reserve((edges.size() - 1) * ref.size());
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double mid = 0.5 * (edges[p] + edges[p + 1]);
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            rule.nodes.push_back(mid + half * ref.nodes[i]);
            rule.weights.push_back(half * ref.weights[i]);
        }
    }
    return rule;
}

}  // namespace srcp

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace dpre {

namespace quad_detail {

// 15-point Gauss-Legendre nodes/weights on [-1,1].
inline constexpr std::array<double, 15> kGL15Nodes = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
    -0.7244177313601700, -0.5709721726085388, -0.3941513470775634,
    -0.2011940939974345, 0.0,                 0.2011940939974345,
    0.3941513470775634,  0.5709721726085388,  0.7244177313601700,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};

inline constexpr std::array<double, 15> kGL15Weights = {
    0.03075324199611727, 0.07036604748810812, 0.1071592204671719,
    0.1395706779261543,  0.1662692058169939,  0.1861610000155622,
    0.1984314853271116,  0.2025782419255613,  0.1984314853271116,
    0.1861610000155622,  0.1662692058169939,  0.1395706779261543,
    0.1071592204671719,  0.07036604748810812, 0.03075324199611727};

} // namespace quad_detail

inline double gauss15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 15; ++i)
        s += quad_detail::kGL15Weights[i] * f(c + h * quad_detail::kGL15Nodes[i]);
    return s * h;
}

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = true;
    std::size_t evaluations = 0;
};

// Adaptive bisection on top of GL15; the error indicator is the change under
// one subdivision. Handles integrable endpoint singularities by grinding the
// mesh, so callers should pre-split at known singular points.
inline QuadResult integrate_adaptive(const std::function<double(double)>& f,
                                     double a, double b, double abs_tol,
                                     double rel_tol, std::size_t max_evals = 2'000'000,
                                     int max_depth = 30, int min_depth = 1) {
    QuadResult res;
    struct Panel {
        double a, b, whole;
        int depth;
    };
    std::vector<Panel> stack;
    double whole = gauss15(f, a, b);
    res.evaluations = 15;
    stack.push_back({a, b, whole, 0});
    double total = 0.0, err = 0.0;
    double scale = std::abs(whole);
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        const double mid = 0.5 * (p.a + p.b);
        const double left = gauss15(f, p.a, mid);
        const double right = gauss15(f, mid, p.b);
        res.evaluations += 30;
        const double delta = left + right - p.whole;
        const double tol = std::max(abs_tol, rel_tol * std::max(scale, std::abs(total)));
        const double panel_tol = tol * (p.b - p.a) / (b - a);
        // min_depth blocks symmetric integrands from faking agreement at the
        // first split; the depth cap keeps point discontinuities from grinding
        // forever, their residual shrinks with the panel width
        if ((p.depth >= min_depth && std::abs(delta) <= std::max(panel_tol, 1e-300)) ||
            p.depth >= max_depth || (p.b - p.a) < 1e-14 * (b - a)) {
            total += left + right;
            err += std::abs(delta);
        } else if (res.evaluations >= max_evals) {
            total += left + right;
            err += std::abs(delta);
            res.converged = false;
        } else {
            stack.push_back({p.a, mid, left, p.depth + 1});
            stack.push_back({mid, p.b, right, p.depth + 1});
        }
        scale = std::max(scale, std::abs(total));
    }
    res.value = total;
    res.error_estimate = err;
    return res;
}

// Geometrically graded panel edges of [0, len] refined toward 0, used to
// resolve |s-t|^{2H-2} style weights: panels [len*2^-(k+1), len*2^-k].
inline std::vector<double> graded_edges(double len, int levels) {
    std::vector<double> edges;
    edges.push_back(0.0);
    for (int k = levels; k >= 0; --k) edges.push_back(len * std::ldexp(1.0, -k));
    return edges;
}

} // namespace dpre

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "errors.hpp"

namespace nnrecover::quad {

/// Gauss-Legendre rule on [-1, 1], computed once by Newton iteration on P_n.
template <int N> struct GaussLegendre {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendre() {
        for (int i = 0; i < N; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int n = 2; n <= N; ++n) {
                    double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    static const GaussLegendre& instance() {
        static const GaussLegendre rule;
        return rule;
    }
};

struct Settings {
    /// integration window [-half_width, half_width] in standard-normal units
    double half_width = 14.0;
    double tolerance = 1e-9;
    double hard_tolerance = 1e-6;
    int max_refinements = 8;
};

/**
 * @brief E_{z ~ N(0,1)}[f(z)] for a vector-valued integrand.
 *
 * The window is cut at every breakpoint, each piece is covered by panels of
 * width at most @p panel_width, and a 10-point Gauss-Legendre rule is applied
 * per panel. Panels are halved until no component moves by more than
 * settings.tolerance. If the last refinement still moves a component by more
 * than settings.hard_tolerance a QuadratureError is thrown.
 *
 * @p f must be callable as `std::array<double, K>(double z)`.
 */
template <std::size_t K, class F>
std::array<double, K> gaussian_expectation(F&& f, std::vector<double> breakpoints,
                                           double panel_width,
                                           const Settings& settings = {}) {
    const auto& gl = GaussLegendre<10>::instance();
    const double lo = -settings.half_width, hi = settings.half_width;
    std::vector<double> cuts{lo};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double b : breakpoints)
        if (b > lo && b < hi && b > cuts.back()) cuts.push_back(b);
    cuts.push_back(hi);

    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    auto integrate = [&](double h) {
        std::array<double, K> total{};
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            double a = cuts[s], b = cuts[s + 1];
            auto panels = static_cast<long>(std::ceil((b - a) / h));
            double w = (b - a) / static_cast<double>(panels);
            for (long p = 0; p < panels; ++p) {
                double c = a + (p + 0.5) * w;
                std::array<double, K> part{};
                for (int q = 0; q < 10; ++q) {
                    double z = c + 0.5 * w * gl.nodes[q];
                    double g = gl.weights[q] * std::exp(-0.5 * z * z);
                    auto v = f(z);
                    for (std::size_t k = 0; k < K; ++k) part[k] += g * v[k];
                }
                for (std::size_t k = 0; k < K; ++k) total[k] += 0.5 * w * norm * part[k];
            }
        }
        return total;
    };

    double h = panel_width;
    auto prev = integrate(h);
    double change = 0.0;
    for (int r = 0; r < settings.max_refinements; ++r) {
        h *= 0.5;
        auto next = integrate(h);
        change = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            change = std::max(change, std::abs(next[k] - prev[k]));
        prev = next;
        if (change < settings.tolerance) return prev;
    }
    if (change > settings.hard_tolerance) {
        std::ostringstream os;
        os << "Gaussian quadrature did not converge (last change " << change << ")";
        throw QuadratureError(os.str());
    }
    return prev;
}

} // namespace nnrecover::quad

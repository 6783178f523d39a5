#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace nnrecover {

/// Second-derivative regime of an activation.
enum class Smoothness {
    Smooth,          ///< |phi''| <= L2 everywhere
    PiecewiseLinear, ///< phi'' = 0 except at finitely many kinks
};

/**
 * @brief A scalar activation together with the metadata the algorithms need.
 *
 * `dphi` is the left derivative at kinks. `p` is the exponent in
 * 0 <= phi'(z) <= L1 |z|^p; for homogeneous activations phi(az) = a^{p+1} phi(z)
 * for a > 0. `breakpoints` lists every point where phi or one of its first two
 * derivatives is non-smooth (quadrature cuts there); for piecewise-linear
 * activations they are also the kinks.
 */
struct ActivationSpec {
    std::string name;
    double (*phi)(double) = nullptr;
    double (*dphi)(double) = nullptr;
    double (*ddphi)(double) = nullptr;
    std::vector<double> breakpoints;
    bool homogeneous = false;
    double p = 0.0;
    Smoothness smoothness = Smoothness::Smooth;
    double L1 = std::numeric_limits<double>::quiet_NaN();
    double L2 = std::numeric_limits<double>::quiet_NaN();
};

namespace act_detail {
inline constexpr double kLeak = 0.01;

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
inline double relu_d(double z) { return z > 0.0 ? 1.0 : 0.0; }
inline double zero(double) { return 0.0; }
inline double leaky(double z) { return z > 0.0 ? z : kLeak * z; }
inline double leaky_d(double z) { return z > 0.0 ? 1.0 : kLeak; }
inline double sqrelu(double z) { return z > 0.0 ? z * z : 0.0; }
inline double sqrelu_d(double z) { return z > 0.0 ? 2.0 * z : 0.0; }
inline double sqrelu_dd(double z) { return z > 0.0 ? 2.0 : 0.0; }
inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}
inline double sigmoid_d(double z) {
    double s = sigmoid(z);
    return s * (1.0 - s);
}
inline double sigmoid_dd(double z) {
    double s = sigmoid(z);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
}
inline double tanh_f(double z) { return std::tanh(z); }
inline double tanh_d(double z) {
    double c = std::cosh(z);
    return std::isfinite(c) ? 1.0 / (c * c) : 0.0;
}
inline double tanh_dd(double z) { return -2.0 * std::tanh(z) * tanh_d(z); }
// erf scaled so that phi'(z) = exp(-z^2)
inline double erf_f(double z) { return 0.5 * std::sqrt(std::numbers::pi) * std::erf(z); }
inline double erf_d(double z) { return std::exp(-z * z); }
inline double erf_dd(double z) { return -2.0 * z * std::exp(-z * z); }
inline double linear(double z) { return z; }
inline double one(double) { return 1.0; }
inline double quadratic(double z) { return z * z; }
inline double quadratic_d(double z) { return 2.0 * z; }
inline double two(double) { return 2.0; }
} // namespace act_detail

inline ActivationSpec relu() {
    return {"relu", act_detail::relu, act_detail::relu_d, act_detail::zero, {0.0},
            true, 0.0, Smoothness::PiecewiseLinear, 1.0,
            std::numeric_limits<double>::quiet_NaN()};
}
inline ActivationSpec leaky_relu() {
    return {"leaky_relu", act_detail::leaky, act_detail::leaky_d, act_detail::zero, {0.0},
            true, 0.0, Smoothness::PiecewiseLinear, 1.0,
            std::numeric_limits<double>::quiet_NaN()};
}
inline ActivationSpec squared_relu() {
    return {"squared_relu", act_detail::sqrelu, act_detail::sqrelu_d, act_detail::sqrelu_dd,
            {0.0}, true, 1.0, Smoothness::Smooth, 2.0, 2.0};
}
inline ActivationSpec sigmoid() {
    return {"sigmoid", act_detail::sigmoid, act_detail::sigmoid_d, act_detail::sigmoid_dd, {},
            false, 0.0, Smoothness::Smooth, 0.25, 1.0 / (6.0 * std::sqrt(3.0))};
}
inline ActivationSpec tanh_act() {
    return {"tanh", act_detail::tanh_f, act_detail::tanh_d, act_detail::tanh_dd, {},
            false, 0.0, Smoothness::Smooth, 1.0, 4.0 / (3.0 * std::sqrt(3.0))};
}
inline ActivationSpec erf_act() {
    return {"erf", act_detail::erf_f, act_detail::erf_d, act_detail::erf_dd, {},
            false, 0.0, Smoothness::Smooth, 1.0, std::sqrt(2.0) * std::exp(-0.5)};
}
inline ActivationSpec linear() {
    return {"linear", act_detail::linear, act_detail::one, act_detail::zero, {},
            true, 0.0, Smoothness::Smooth, 1.0, 0.0};
}
inline ActivationSpec quadratic() {
    return {"quadratic", act_detail::quadratic, act_detail::quadratic_d, act_detail::two, {},
            true, 1.0, Smoothness::Smooth, 2.0, 2.0};
}

inline std::vector<std::string> activation_names() {
    return {"relu", "leaky_relu", "squared_relu", "sigmoid", "tanh", "erf", "linear", "quadratic"};
}

inline ActivationSpec activation_by_name(const std::string& name) {
    if (name == "relu") return relu();
    if (name == "leaky_relu") return leaky_relu();
    if (name == "squared_relu") return squared_relu();
    if (name == "sigmoid") return sigmoid();
    if (name == "tanh") return tanh_act();
    if (name == "erf") return erf_act();
    if (name == "linear") return linear();
    if (name == "quadratic") return quadratic();
    throw Error("unknown activation '" + name + "'");
}

/**
 * @brief One-dimensional Gaussian functionals of an activation at scale sigma.
 *
 *  - gamma[j] = E[phi(sigma z) z^j], j = 0..4
 *  - alpha[q] = E[phi'(sigma z) z^q], q = 0..2
 *  - beta0, beta2 = E[phi'(sigma z)^2], E[phi'(sigma z)^2 z^2]
 *  - m[j-1] = m_j, the Hermite coefficients of the j-th score moment
 */
struct MomentProfile {
    double sigma = 1.0;
    std::array<double, 5> gamma{};
    std::array<double, 3> alpha{};
    double beta0 = 0.0;
    double beta2 = 0.0;
    double rho = 0.0;
    std::array<double, 4> m{};

    double m_of(int j) const { return m.at(static_cast<std::size_t>(j - 1)); }
};

inline double rho_from(const MomentProfile& mp) {
    const auto& a = mp.alpha;
    return std::min({mp.beta0 - a[0] * a[0] - a[1] * a[1],
                     mp.beta2 - a[1] * a[1] - a[2] * a[2],
                     a[0] * a[2] - a[1] * a[1]});
}

inline MomentProfile gaussian_moments(const ActivationSpec& act, double sigma,
                                      const quad::Settings& settings = {}) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DimensionError("gaussian_moments: sigma must be positive and finite");
    std::vector<double> cuts;
    for (double b : act.breakpoints) cuts.push_back(b / sigma);
    const double width = 0.5 * std::min(1.0, 1.0 / sigma);
    auto vals = quad::gaussian_expectation<10>(
        [&](double z) {
            double f = act.phi(sigma * z), g = act.dphi(sigma * z);
            double z2 = z * z;
            return std::array<double, 10>{f,         f * z,     f * z2, f * z2 * z, f * z2 * z2,
                                          g,         g * z,     g * z2, g * g,      g * g * z2};
        },
        cuts, width, settings);

    MomentProfile mp;
    mp.sigma = sigma;
    for (int j = 0; j < 5; ++j) mp.gamma[j] = vals[j];
    for (int q = 0; q < 3; ++q) mp.alpha[q] = vals[5 + q];
    mp.beta0 = vals[8];
    mp.beta2 = vals[9];
    const auto& g = mp.gamma;
    mp.m = {g[1], g[2] - g[0], g[3] - 3.0 * g[1], g[4] + 3.0 * g[0] - 6.0 * g[2]};
    mp.rho = rho_from(mp);
    return mp;
}

inline double rho(const ActivationSpec& act, double sigma) {
    return gaussian_moments(act, sigma).rho;
}

/// (3 sigma_1 / 2)^{4p} / min over [sigma_k / 2, 3 sigma_1 / 2] of rho^2, on a
/// 41-point grid.
inline double conditioning_tau(const ActivationSpec& act, double sigma_k, double sigma_1) {
    double lo = 0.5 * sigma_k, hi = 1.5 * sigma_1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i) {
        double s = lo + (hi - lo) * i / 40.0;
        double r = rho(act, s);
        best = std::min(best, r * r);
    }
    return std::pow(hi, 4.0 * act.p) / best;
}

/// phi(a z) == a^{p+1} phi(z) for a in {2, 3} on a z grid.
inline bool homogeneity_verified(const ActivationSpec& act) {
    if (!act.homogeneous) return false;
    for (double a : {2.0, 3.0}) {
        double scale = std::pow(a, act.p + 1.0);
        for (int i = -40; i <= 40; ++i) {
            double z = 0.25 * i;
            double lhs = act.phi(a * z), rhs = scale * act.phi(z);
            if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(lhs))) return false;
        }
    }
    return true;
}

/// Tolerance below which a moment coefficient counts as vanishing.
inline constexpr double kVanishingTol = 1e-8;

inline bool vanishes(double mj, double scale) {
    return std::abs(mj) < kVanishingTol * std::max(1.0, scale);
}

/// c_j with m_j(sigma) = c_j sigma^{p+1}; verified at sigma in {0.5, 1, 2}.
inline std::array<double, 4> homogeneous_constants(const ActivationSpec& act) {
    if (!homogeneity_verified(act))
        throw EligibilityError("homogeneous_constants: activation '" + act.name +
                               "' is not homogeneous");
    auto c = gaussian_moments(act, 1.0).m;
    double scale = 0.0;
    for (double v : c) scale = std::max(scale, std::abs(v));
    for (double s : {0.5, 2.0}) {
        auto ms = gaussian_moments(act, s).m;
        double f = std::pow(s, act.p + 1.0);
        for (int j = 0; j < 4; ++j)
            if (std::abs(ms[j] / f - c[j]) > 1e-8 * std::max(scale, 1e-300))
                throw EligibilityError("homogeneous_constants: m_j / sigma^{p+1} not constant for '" +
                                       act.name + "'");
    }
    for (auto& v : c)
        if (vanishes(v, scale)) v = 0.0;
    return c;
}

} // namespace nnrecover

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "activations.hpp"

namespace nnrecover {

/// Which branch of the order selection applies.
enum class OrderCase {
    Even,    ///< m1 = m3 = 0
    Odd,     ///< m2 = m4 = 0
    General, ///< neither
};

/**
 * @brief Moment orders used by the initialization.
 *
 * j2 / j3: first non-vanishing order >= 2 / >= 3 (subspace and tensor moments).
 * l1 / l2: orders of the vector and k x k moments used for magnitude and sign
 * recovery.
 */
struct Orders {
    int j2 = 2;
    int j3 = 3;
    int l1 = 1;
    int l2 = 2;
    OrderCase kase = OrderCase::General;
};

inline const char* to_string(OrderCase c) {
    switch (c) {
    case OrderCase::Even: return "even";
    case OrderCase::Odd: return "odd";
    default: return "general";
    }
}

/// Orders from m1..m4; entries with |m_j| < kVanishingTol count as zero.
inline Orders select_orders(const std::array<double, 4>& m) {
    auto nz = [&](int j) { return std::abs(m[static_cast<std::size_t>(j - 1)]) >= kVanishingTol; };
    auto first = [&](std::initializer_list<int> js) {
        for (int j : js)
            if (nz(j)) return j;
        return 0;
    };
    Orders o;
    o.j2 = first({2, 3, 4});
    o.j3 = first({3, 4});
    if (o.j3 == 0)
        throw EligibilityError("select_orders: third and fourth moments both vanish");
    if (!nz(1) && !nz(3)) {
        o.kase = OrderCase::Even;
        o.l1 = o.l2 = first({2, 4});
    } else if (!nz(2) && !nz(4)) {
        o.kase = OrderCase::Odd;
        o.l1 = first({1, 3});
        o.l2 = 3;
    } else {
        o.kase = OrderCase::General;
        o.l1 = first({1, 3});
        o.l2 = first({2, 4});
    }
    if (o.j2 == 0 || o.l1 == 0 || o.l2 == 0)
        throw EligibilityError("select_orders: no usable moment order");
    return o;
}

inline Orders select_orders(const MomentProfile& mp) { return select_orders(mp.m); }

/// Outcome of checking an activation against the structural requirements of
/// the recovery guarantees on a grid of scales.
struct PropertyReport {
    std::string activation;
    std::vector<double> sigma_grid;
    std::vector<MomentProfile> profiles;

    // derivative bound 0 <= phi'(z) <= L1 |z|^p
    bool derivative_nonnegative = false;
    double fitted_L1 = 0.0;
    bool derivative_bounded = false;
    bool property_derivative = false;

    // curvature margin rho(sigma) > 1e-6 on the grid
    double rho_min = 0.0;
    bool property_rho = false;

    // second-derivative class
    Smoothness smoothness = Smoothness::Smooth;
    bool property_smoothness = false;

    // non-vanishing moment assumption
    std::array<bool, 4> m_vanishes{};
    bool assumption_consistent = false; ///< each m_j zero everywhere or nowhere on the grid
    bool assumption_m3_or_m4 = false;
    bool even = false;
    bool odd_up_to_constant = false;
    bool assumption_parity = false; ///< m1=m3=0 implies even, m2=m4=0 implies odd

    bool homogeneous = false;
    std::optional<Orders> orders;
    bool eligible_for_tensor_init = false; ///< orders exist, assumptions hold and phi is homogeneous
};

inline constexpr double kRhoTolerance = 1e-6;

inline PropertyReport check_properties(const ActivationSpec& act,
                                       const std::vector<double>& sigma_grid) {
    if (sigma_grid.empty()) throw DimensionError("check_properties: empty sigma grid");
    PropertyReport r;
    r.activation = act.name;
    r.sigma_grid = sigma_grid;
    r.smoothness = act.smoothness;

    std::vector<double> zs;
    for (int i = -2000; i <= 2000; ++i) zs.push_back(0.005 * i); // [-10, 10]
    std::vector<double> tail;
    for (int i = 0; i <= 200; ++i) {
        double z = 50.0 * std::pow(4.0, i / 200.0); // [50, 200]
        tail.push_back(z);
        tail.push_back(-z);
    }

    r.derivative_nonnegative = true;
    for (double z : zs)
        if (act.dphi(z) < -1e-12) r.derivative_nonnegative = false;
    auto ratio = [&](double z) { return std::abs(act.dphi(z)) / std::pow(std::abs(z), act.p); };
    double core = 0.0, far = 0.0;
    for (double z : zs)
        if (z != 0.0 || act.p == 0.0) core = std::max(core, ratio(z));
    for (double z : tail) far = std::max(far, ratio(z));
    r.fitted_L1 = std::max(core, far);
    r.derivative_bounded = std::isfinite(r.fitted_L1) && far <= core * (1.0 + 1e-6) + 1e-12;
    r.property_derivative = r.derivative_nonnegative && r.derivative_bounded;

    // second-derivative class: compare ddphi to a central difference of dphi
    // away from breakpoints
    const double h = 1e-5;
    r.property_smoothness = true;
    for (double z : zs) {
        bool near_break = false;
        for (double b : act.breakpoints) near_break |= std::abs(z - b) < 10 * h;
        if (near_break) continue;
        double fd = (act.dphi(z + h) - act.dphi(z - h)) / (2 * h);
        double dd = act.ddphi(z);
        if (std::abs(fd - dd) > 1e-5 * std::max(1.0, std::abs(dd))) r.property_smoothness = false;
        if (act.smoothness == Smoothness::Smooth) {
            if (!(std::abs(dd) <= act.L2 + 1e-9)) r.property_smoothness = false;
        } else if (dd != 0.0) {
            r.property_smoothness = false;
        }
    }

    r.rho_min = std::numeric_limits<double>::infinity();
    std::optional<std::array<bool, 4>> pattern;
    r.assumption_consistent = true;
    for (double s : sigma_grid) {
        auto mp = gaussian_moments(act, s);
        r.rho_min = std::min(r.rho_min, mp.rho);
        std::array<bool, 4> z{};
        for (int j = 0; j < 4; ++j) z[j] = std::abs(mp.m[j]) < kVanishingTol;
        if (!pattern) pattern = z;
        else if (*pattern != z) r.assumption_consistent = false;
        r.profiles.push_back(mp);
    }
    r.property_rho = r.rho_min > kRhoTolerance;
    r.m_vanishes = *pattern;
    r.assumption_m3_or_m4 = !r.m_vanishes[2] || !r.m_vanishes[3];

    double scale = 0.0, even_dev = 0.0, odd_dev = 0.0;
    const double phi0 = act.phi(0.0);
    for (double z : zs) {
        double a = act.phi(z), b = act.phi(-z);
        scale = std::max(scale, std::abs(a));
        even_dev = std::max(even_dev, std::abs(a - b));
        odd_dev = std::max(odd_dev, std::abs(a + b - 2.0 * phi0));
    }
    r.even = even_dev <= 1e-12 * std::max(1.0, scale);
    r.odd_up_to_constant = odd_dev <= 1e-12 * std::max(1.0, scale);
    bool m13 = r.m_vanishes[0] && r.m_vanishes[2];
    bool m24 = r.m_vanishes[1] && r.m_vanishes[3];
    r.assumption_parity = (!m13 || r.even) && (!m24 || r.odd_up_to_constant);

    r.homogeneous = homogeneity_verified(act);
    try {
        r.orders = select_orders(r.profiles.front().m);
    } catch (const EligibilityError&) {
        r.orders.reset();
    }
    r.eligible_for_tensor_init = r.orders.has_value() && r.assumption_m3_or_m4 &&
                                 r.assumption_consistent && r.assumption_parity && r.homogeneous;
    return r;
}

} // namespace nnrecover

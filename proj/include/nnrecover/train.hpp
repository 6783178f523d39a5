#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>

#include "assignment.hpp"
#include "model.hpp"

namespace nnrecover {

/// phi is even (phi(z) = phi(-z)) on a probe grid.
inline bool is_even(const ActivationSpec& act) {
    for (int i = 1; i <= 200; ++i) {
        double z = 0.05 * i;
        if (std::abs(act.phi(z) - act.phi(-z)) > 1e-12 * std::max(1.0, std::abs(act.phi(z)))) return false;
    }
    return true;
}

inline MatchResult recovery_error(const Matrix& W, const Vector& v, const TeacherNetwork& t) {
    return recovery_error(W, v, t.W, t.v, is_even(t.act));
}

/// (1 / 2n) sum (sum_i v_i phi(w_i^T x) - y)^2
inline double empirical_risk(const Matrix& W, const Vector& v, const SampleSet& S,
                             const ActivationSpec& act) {
    Vector r = forward(W, v, act, S.X) - S.y;
    return 0.5 * r.squaredNorm() / static_cast<double>(S.n());
}

/// Gradient of the empirical risk with respect to W (d x k); phi' is the left
/// derivative at kinks.
inline Matrix empirical_gradient(const Matrix& W, const Vector& v, const SampleSet& S,
                                 const ActivationSpec& act) {
    if (W.rows() != S.d() || W.cols() != v.size()) throw DimensionError("empirical_gradient: shape mismatch");
    Matrix Z = W.transpose() * S.X; // k x n
    Vector res = Z.unaryExpr(act.phi).transpose() * v - S.y;
    Matrix D = Z.unaryExpr(act.dphi); // k x n
    D = (v.asDiagonal() * D) * res.asDiagonal();
    return S.X * D.transpose() / static_cast<double>(S.n());
}

/// Gradient of the empirical risk with respect to v.
inline Vector empirical_gradient_v(const Matrix& W, const Vector& v, const SampleSet& S,
                                   const ActivationSpec& act) {
    Matrix F = (W.transpose() * S.X).unaryExpr(act.phi);
    Vector res = F.transpose() * v - S.y;
    return F * res / static_cast<double>(S.n());
}

struct GdConfig {
    std::optional<double> eta; ///< unset: 1 / (k v_max^2 sigma_1^{2p}) from the starting point
    int T = 500;
    bool resample = false;
    double tol = 0.01;     ///< stop once rel_err <= tol (needs a teacher); 0 disables
    bool train_v = false;  ///< also update v by gradient (random-init baseline only)
    bool record_trace = true;
};

struct RecoveryReport {
    Matrix W;
    Vector v;
    Vector v0;
    std::vector<double> rel_err; ///< per iteration, entry 0 is the starting point
    std::vector<double> risk;
    std::vector<Index> permutation;
    bool v_matched = false;
    bool success = false;
    int iterations = 0;
    double eta = 0.0;
    double seconds = 0.0;
    bool theory_regime = true; ///< false for piecewise-linear activations
};

/// Step size 1 / (k v_max^2 sigma_1^{2p}) with sigma_1 = largest column norm of W0.
inline double default_step(const Matrix& W0, const Vector& v0, double p) {
    double s1 = W0.colwise().norm().maxCoeff();
    double vmax = v0.cwiseAbs().maxCoeff();
    return 1.0 / (static_cast<double>(W0.cols()) * vmax * vmax * std::pow(s1, 2.0 * p));
}

/**
 * @brief Gradient descent on the empirical risk with v held fixed.
 *
 * Without resampling every step uses all of S. With resampling S is cut into
 * T + 1 disjoint blocks and step q uses block q (block 0 is left for the
 * initialization). When @p teacher is given, the matched relative error is
 * recorded every step and the run stops at cfg.tol.
 *
 * @throws DivergenceError if the risk grows tenfold over ten steps or becomes non-finite.
 */
inline RecoveryReport learn(const SampleSet& S, const ActivationSpec& act, const Matrix& W0,
                            const Vector& v0, const GdConfig& cfg,
                            const TeacherNetwork* teacher = nullptr) {
    if (cfg.T < 1) throw DimensionError("learn: T must be >= 1");
    if (W0.rows() != S.d() || W0.cols() != v0.size()) throw DimensionError("learn: shape mismatch");
    const auto start = std::chrono::steady_clock::now();
    RecoveryReport rep;
    rep.W = W0;
    rep.v = v0;
    rep.v0 = v0;
    rep.theory_regime = act.smoothness == Smoothness::Smooth;
    rep.eta = cfg.eta ? *cfg.eta : default_step(W0, v0, act.p);
    if (!(rep.eta > 0.0)) throw DimensionError("learn: step size must be positive");

    const Index blocks = cfg.T + 1;
    if (cfg.resample && S.n() < blocks) throw DimensionError("learn: not enough samples to resample");
    auto block = [&](int q) {
        Index size = S.n() / blocks;
        return S.slice(static_cast<Index>(q) * size, size);
    };

    auto record = [&] {
        double risk = empirical_risk(rep.W, rep.v, S, act);
        if (cfg.record_trace || rep.risk.empty()) rep.risk.push_back(risk);
        else rep.risk.back() = risk;
        if (teacher) {
            auto m = recovery_error(rep.W, rep.v, *teacher);
            if (cfg.record_trace || rep.rel_err.empty()) rep.rel_err.push_back(m.rel_err);
            else rep.rel_err.back() = m.rel_err;
            rep.permutation = m.permutation;
            rep.v_matched = m.v_matched;
        }
        return risk;
    };

    std::vector<double> risks{record()};
    for (int q = 1; q <= cfg.T; ++q) {
        if (teacher && cfg.tol > 0.0 && rep.v_matched && rep.rel_err.back() <= cfg.tol) break;
        const SampleSet& batch = cfg.resample ? block(q) : S;
        Matrix g = empirical_gradient(rep.W, rep.v, batch, act);
        if (cfg.train_v) {
            Vector gv = empirical_gradient_v(rep.W, rep.v, batch, act);
            rep.v -= rep.eta * gv;
        }
        rep.W -= rep.eta * g;
        rep.iterations = q;
        double risk = record();
        risks.push_back(risk);
        const std::size_t t = risks.size() - 1;
        if (!std::isfinite(risk) || (t >= 10 && risk > 10.0 * risks[t - 10] && risks[t - 10] > 0.0)) {
            std::ostringstream os;
            os << "learn: risk diverged at step " << q << " with eta = " << rep.eta;
            throw DivergenceError(os.str());
        }
    }
    if (teacher) rep.success = rep.v_matched && rep.rel_err.back() <= 0.01;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Random starting point: W entries i.i.d. N(0, 1/d); v entries N(0, 1) when requested.
inline Matrix random_weights(Index d, Index k, std::uint64_t seed) {
    Engine eng = make_engine(seed, "random-init-W");
    return gaussian_matrix(eng, d, k, 1.0 / std::sqrt(static_cast<double>(d)));
}

inline Vector random_output_weights(Index k, std::uint64_t seed) {
    Engine eng = make_engine(seed, "random-init-v");
    return gaussian_matrix(eng, k, 1);
}

} // namespace nnrecover

#pragma once

#include <optional>
#include <string>

#include "cp_decomposition.hpp"
#include "moments.hpp"
#include "power_method.hpp"
#include "properties.hpp"

namespace nnrecover {

struct InitConfig {
    PowerMethodConfig power{};
    int projections = 100;            ///< random slices for the tensor decomposition
    int als_iters = 100;              ///< symmetric ALS sweeps after the pencil step
    double alpha_threshold = 0.05;    ///< min |alpha^T V u_i| is alpha_threshold / sqrt(k)
    int alpha_attempts = 20;
    EstimatorOptions estimator{};     ///< used when initializing from a SampleSet
    std::uint64_t seed = 0;
};

/**
 * @brief Output of the tensor initialization.
 *
 * W0 column i is s_i |w_i| V u_i. zhat / rhat are the solutions of the two
 * least-squares systems; their residuals are reported next to the residual
 * of the zero vector.
 */
struct InitResult {
    Matrix W0;
    Vector v0;
    Vector s0;
    Vector zhat;
    Vector rhat;
    Orders orders;
    Vector alpha;
    SubspaceBasis basis;
    CpFactors factors;
    double residual_z = 0.0, zero_residual_z = 0.0;
    double residual_r = 0.0, zero_residual_r = 0.0;
    double min_alpha_projection = 0.0;
    int alpha_draws = 1;
};

/// Thrown by rec_mag_sign when alpha is nearly orthogonal to a recovered direction.
class AlphaRejected : public Error {
  public:
    using Error::Error;
};

/**
 * @brief Magnitude and sign recovery for homogeneous activations.
 *
 * @param U  k x k recovered factors u_i (columns), so V u_i estimates s_i wbar_i
 * @param c  homogeneous constants c_1..c_4
 * @param p  homogeneity exponent (phi(az) = a^{p+1} phi(z))
 */
inline InitResult rec_mag_sign(const Matrix& V, const Matrix& U, const MomentOracle& oracle,
                               const Orders& o, const std::array<double, 4>& c, double p,
                               const Vector& alpha, double threshold) {
    const Index k = V.cols();
    if (U.rows() != k || U.cols() != k) throw DimensionError("rec_mag_sign: factor shape mismatch");
    InitResult r;
    r.orders = o;
    r.alpha = alpha;
    Matrix Vu = V * U;
    Vector proj = Vu.transpose() * alpha;
    r.min_alpha_projection = proj.cwiseAbs().minCoeff();
    if (r.min_alpha_projection < threshold)
        throw AlphaRejected("rec_mag_sign: alpha nearly orthogonal to a recovered direction");

    Vector Q1 = oracle.moment(q1_request(o, alpha), Stage::Magnitude).vector();
    Matrix Q2 = oracle.moment(q2_request(o, alpha, V), Stage::Sign).matrix();

    if (singular_values(Vu).minCoeff() < 1e-8)
        throw IllPosedRecoveryError("rec_mag_sign: first system is rank deficient");
    r.zhat = Vu.colPivHouseholderQr().solve(Q1);
    r.residual_z = (Vu * r.zhat - Q1).norm();
    r.zero_residual_z = Q1.norm();

    Matrix A(k * k, k);
    Vector b(k * k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) {
            b(i * k + j) = Q2(i, j);
            for (Index t = 0; t < k; ++t) A(i * k + j, t) = U(i, t) * U(j, t);
        }
    if (singular_values(A).minCoeff() < 1e-8)
        throw IllPosedRecoveryError("rec_mag_sign: second system is rank deficient");
    r.rhat = A.colPivHouseholderQr().solve(b);
    r.residual_r = (A * r.rhat - b).norm();
    r.zero_residual_r = b.norm();

    const double c1 = c[o.l1 - 1], c2 = c[o.l2 - 1];
    r.v0.resize(k);
    r.s0.resize(k);
    r.W0.resize(V.rows(), k);
    for (Index i = 0; i < k; ++i) {
        switch (o.kase) {
        case OrderCase::Even:
            r.v0(i) = sign_of(r.rhat(i) * c2);
            r.s0(i) = 1.0;
            break;
        case OrderCase::Odd:
            r.v0(i) = 1.0;
            r.s0(i) = sign_of(r.v0(i) * r.zhat(i) * c1);
            break;
        case OrderCase::General:
            r.v0(i) = sign_of(r.rhat(i) * c2);
            r.s0(i) = sign_of(r.v0(i) * r.zhat(i) * c1);
            break;
        }
        double mag = std::pow(std::abs(r.zhat(i) / (c1 * std::pow(proj(i), o.l1 - 1))), 1.0 / (p + 1.0));
        r.W0.col(i) = r.s0(i) * mag * Vu.col(i);
    }
    return r;
}

namespace init_detail {
template <class F> auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const AlphaRejected&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}
} // namespace init_detail

/**
 * @brief Full tensor initialization from a moment source.
 *
 * subspace (P2 power method) -> reduced tensor R3 = P3(V,V,V) -> rank-k
 * decomposition -> magnitude/sign recovery. The random direction alpha is
 * redrawn (up to cfg.alpha_attempts times) when it is nearly orthogonal to a
 * recovered direction; only stages that depend on alpha are recomputed.
 * Stage failures are rethrown as StageError naming the stage.
 */
inline InitResult initialize(const MomentOracle& oracle, Index k, const ActivationSpec& act,
                             const InitConfig& cfg = {}) {
    const auto c = homogeneous_constants(act); // rejects non-homogeneous activations
    const Orders o = select_orders(c);          // rejects vanishing m3 and m4
    const Index d = oracle.dim();
    if (k < 1 || k > d) throw DimensionError("initialize: need 1 <= k <= d");
    const double threshold = cfg.alpha_threshold / std::sqrt(static_cast<double>(k));

    std::optional<SubspaceBasis> basis;
    std::optional<CpFactors> factors;
    for (int attempt = 0; attempt < cfg.alpha_attempts; ++attempt) {
        Engine eng = make_engine(derive_seed(cfg.seed, {static_cast<std::uint64_t>(attempt)}), "alpha");
        Vector alpha = unit_sphere(eng, d);
        if (!basis || o.j2 > 2) {
            factors.reset();
            basis = init_detail::staged("subspace", [&] {
                PowerMethodConfig pc = cfg.power;
                pc.seed = derive_seed(cfg.seed, "power");
                return power_method(
                    [&](const Matrix& V) {
                        return oracle.moment(p2_matvec_request(o, alpha, V), Stage::Subspace).matrix();
                    },
                    d, k, pc);
            });
            oracle.set_subspace(basis->V);
        }
        if (!factors || o.j3 > 3) {
            factors = init_detail::staged("tensor", [&] {
                Tensor3 R3 = oracle.moment(r3_request(o, alpha, basis->V), Stage::Tensor).tensor();
                return decompose_rank_k(R3, k, cfg.projections, derive_seed(cfg.seed, "cp"), cfg.als_iters);
            });
        }
        try {
            InitResult r = init_detail::staged("recovery", [&] {
                return rec_mag_sign(basis->V, factors->factors, oracle, o, c, act.p, alpha, threshold);
            });
            r.basis = *basis;
            r.factors = *factors;
            r.alpha_draws = attempt + 1;
            return r;
        } catch (const AlphaRejected&) {
            continue;
        }
    }
    throw StageError("recovery", "no acceptable alpha after " + std::to_string(cfg.alpha_attempts) + " draws");
}

inline InitResult initialize(const SampleSet& S, Index k, const ActivationSpec& act,
                             const InitConfig& cfg = {}) {
    (void)select_orders(homogeneous_constants(act)); // eligibility before touching the data
    EmpiricalMoments oracle(S, cfg.estimator);
    return initialize(oracle, k, act, cfg);
}

} // namespace nnrecover

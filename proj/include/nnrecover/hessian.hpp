#pragma once

#include <Eigen/Eigenvalues>

#include "model.hpp"

namespace nnrecover {

/**
 * @brief Empirical Hessian of the risk with respect to vec(W) (column-major,
 * index j * d + a).
 *
 * Block (j, l) is (1/n) sum v_j v_l phi'(w_j^T x) phi'(w_l^T x) x x^T; diagonal
 * blocks of smooth activations add (1/n) sum residual v_j phi''(w_j^T x) x x^T.
 * For piecewise-linear activations phi'' vanishes almost surely and the term
 * is omitted.
 */
inline Matrix empirical_hessian(const Matrix& W, const Vector& v, const SampleSet& S,
                                const ActivationSpec& act) {
    const Index d = W.rows(), k = W.cols(), n = S.n();
    if (d != S.d() || v.size() != k) throw DimensionError("empirical_hessian: shape mismatch");
    if (d * k > 2000) throw DimensionError("empirical_hessian: d k exceeds the dense limit of 2000");
    Matrix Z = W.transpose() * S.X;
    Matrix D1 = Z.unaryExpr(act.dphi);
    Vector res = Z.unaryExpr(act.phi).transpose() * v - S.y;
    const bool curvature = act.smoothness == Smoothness::Smooth;
    Matrix D2;
    if (curvature) D2 = Z.unaryExpr(act.ddphi);

    Matrix H(d * k, d * k);
    for (Index j = 0; j < k; ++j)
        for (Index l = j; l < k; ++l) {
            Vector w = (v(j) * v(l)) * D1.row(j).cwiseProduct(D1.row(l)).transpose();
            if (j == l && curvature) w += v(j) * res.cwiseProduct(D2.row(j).transpose());
            w /= static_cast<double>(n);
            Matrix block = S.X * w.asDiagonal() * S.X.transpose();
            H.block(j * d, l * d, d, d) = block;
            H.block(l * d, j * d, d, d) = block.transpose();
        }
    return 0.5 * (H + H.transpose());
}

struct HessianReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double theory_lower = 0.0; ///< v_min^2 rho(sigma_k) / (kappa^2 lambda)
    double theory_upper = 0.0; ///< k v_max^2 sigma_1^{2p}
    double ratio_lower = 0.0;  ///< lambda_min / theory_lower
    double ratio_upper = 0.0;  ///< lambda_max / theory_upper
    Index n = 0;
    double distance = 0.0; ///< |W - W*|_F / |W*|_F
};

inline std::pair<double, double> extreme_eigenvalues(const Matrix& H) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("extreme_eigenvalues: eigensolver did not converge");
    return {es.eigenvalues()(0), es.eigenvalues()(H.rows() - 1)};
}

/// Report for the Hessian at W on samples S of the teacher.
inline HessianReport spectrum_report(const TeacherNetwork& t, const Matrix& W, const SampleSet& S) {
    HessianReport r;
    auto [lo, hi] = extreme_eigenvalues(empirical_hessian(W, t.v, S, t.act));
    r.lambda_min = lo;
    r.lambda_max = hi;
    const auto cn = condition_numbers(t);
    const double sk = cn.sigma(cn.sigma.size() - 1), s1 = cn.sigma(0);
    r.theory_lower = cn.v_min * cn.v_min * rho(t.act, sk) / (cn.kappa * cn.kappa * cn.lambda);
    r.theory_upper = static_cast<double>(t.k()) * cn.v_max * cn.v_max * std::pow(s1, 2.0 * t.act.p);
    r.ratio_lower = r.lambda_min / r.theory_lower;
    r.ratio_upper = r.lambda_max / r.theory_upper;
    r.n = S.n();
    r.distance = (W - t.W).norm() / t.W.norm();
    return r;
}

inline HessianReport spectrum_report(const TeacherNetwork& t, const Matrix& W, Index n, std::uint64_t seed) {
    return spectrum_report(t, W, sample(t, n, seed));
}

/// W* + offset |W*|_F G / |G|_F for a seeded Gaussian direction G.
inline Matrix perturb(const TeacherNetwork& t, double offset, std::uint64_t seed) {
    if (offset == 0.0) return t.W;
    Engine eng = make_engine(seed, "hessian-offset");
    Matrix G = gaussian_matrix(eng, t.d(), t.k());
    return t.W + offset * t.W.norm() * G / G.norm();
}

/// Smallest lambda_min seen on the sphere of radius @p offset around W*.
struct NeighborhoodMinimum {
    double lambda_min = 0.0;
    Matrix W; ///< the point attaining it
};

/**
 * @brief Estimate of min lambda_min over |W - W*|_F = offset |W*|_F.
 *
 * Evaluates the antithetic pairs W* +- offset |W*|_F G_r / |G_r|_F for
 * @p directions seeded Gaussian G_r. A single random direction can raise
 * lambda_min (it may lengthen every column); the pair makes the first-order
 * change non-positive, so the estimate tracks the neighborhood minimum.
 */
inline NeighborhoodMinimum neighborhood_lambda_min(const TeacherNetwork& t, const SampleSet& S, double offset,
                                                   int directions, std::uint64_t seed) {
    if (directions < 1) throw DimensionError("neighborhood_lambda_min: need at least one direction");
    NeighborhoodMinimum best;
    best.lambda_min = std::numeric_limits<double>::infinity();
    for (int r = 0; r < directions; ++r) {
        const Matrix step = perturb(t, offset, derive_seed(seed, {static_cast<std::uint64_t>(r)})) - t.W;
        for (double sgn : {1.0, -1.0}) {
            Matrix W = t.W + sgn * step;
            double l = extreme_eigenvalues(empirical_hessian(W, t.v, S, t.act)).first;
            if (l < best.lambda_min) {
                best.lambda_min = l;
                best.W = W;
            }
        }
        if (offset == 0.0) break;
    }
    return best;
}

/// Bootstrap standard error of lambda_min over @p reps resamples of S.
inline double bootstrap_lambda_min_se(const TeacherNetwork& t, const Matrix& W, const SampleSet& S,
                                      int reps, std::uint64_t seed) {
    Engine eng = make_engine(seed, "bootstrap");
    std::uniform_int_distribution<Index> pick(0, S.n() - 1);
    std::vector<double> vals;
    for (int b = 0; b < reps; ++b) {
        SampleSet B;
        B.X.resize(S.d(), S.n());
        B.y.resize(S.n());
        for (Index i = 0; i < S.n(); ++i) {
            Index j = pick(eng);
            B.X.col(i) = S.X.col(j);
            B.y(i) = S.y(j);
        }
        vals.push_back(extreme_eigenvalues(empirical_hessian(W, t.v, B, t.act)).first);
    }
    double mean = 0.0;
    for (double x : vals) mean += x;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double x : vals) var += (x - mean) * (x - mean);
    return std::sqrt(var / std::max<std::size_t>(1, vals.size() - 1));
}

} // namespace nnrecover

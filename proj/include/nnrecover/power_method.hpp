#pragma once

#include <algorithm>
#include <functional>
#include <numeric>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace nnrecover {

/// Orthonormal estimate of the span of the k dominant eigenvectors of a
/// symmetric (possibly indefinite) operator.
struct SubspaceBasis {
    Matrix V;              ///< d x k, orthonormal columns
    Vector eig_magnitudes; ///< |v^T P v| of the picked directions
    Index k1 = 0;          ///< picked from C I + P
    Index k2 = 0;          ///< picked from C I - P
    double C = 0.0;
    int iterations = 0;
    double last_change = 0.0; ///< distance between the last two picked subspaces
};

struct PowerMethodConfig {
    int max_iters = 1000;
    double tol = 1e-10;
    int norm_iters = 50;
    std::uint64_t seed = 0;
};

using MatVec = std::function<Matrix(const Matrix&)>;

/// Largest |eigenvalue| of a symmetric operator by single-vector power iteration.
inline double operator_norm(const MatVec& apply, Index d, int iters, std::uint64_t seed) {
    Engine eng = make_engine(seed, "power-norm");
    Vector x = unit_sphere(eng, d);
    double est = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vector y = apply(x);
        est = y.norm();
        if (est == 0.0) return 0.0;
        x = y / est;
    }
    return est;
}

/**
 * @brief Two-branch orthogonal iteration.
 *
 * Runs orthogonal iteration on C I + P and C I - P (C = 3 x a power-iteration
 * estimate of |P|), ranks the 2k Rayleigh magnitudes |v^T P v|, keeps the k
 * largest mutually distinct directions, and orthogonalizes the second
 * branch's picks against the first.
 * Stops when the picked subspace moves by less than cfg.tol between
 * iterations.
 */
inline SubspaceBasis power_method(const MatVec& apply, Index d, Index k, const PowerMethodConfig& cfg = {}) {
    if (k < 1 || k > d) throw DimensionError("power_method: need 1 <= k <= d");
    if (cfg.max_iters < 1) throw DimensionError("power_method: need at least one iteration");
    SubspaceBasis out;
    out.C = 3.0 * operator_norm(apply, d, cfg.norm_iters, cfg.seed);
    if (out.C == 0.0) throw DegenerateSpectrumError("power_method: operator is zero");

    Engine eng = make_engine(cfg.seed, "power-start");
    Matrix V1 = orthonormalize(gaussian_matrix(eng, d, k));
    Matrix V2 = orthonormalize(gaussian_matrix(eng, d, k));

    auto pick = [&](const Matrix& A1, const Matrix& P1, const Matrix& A2, const Matrix& P2,
                    SubspaceBasis& b) {
        std::vector<std::pair<double, Index>> cand; // (magnitude, branch * k + column)
        for (Index i = 0; i < k; ++i) cand.push_back({std::abs(A1.col(i).dot(P1.col(i))), i});
        for (Index i = 0; i < k; ++i) cand.push_back({std::abs(A2.col(i).dot(P2.col(i))), k + i});
        std::stable_sort(cand.begin(), cand.end(), [](auto& a, auto& b2) { return a.first > b2.first; });
        // Greedy by magnitude, skipping directions already spanned by earlier
        // picks: when d - k is small the top k of C I + P reach into the
        // negative eigenvalues, so both branches can hold the same eigenvector.
        std::vector<Index> c1, c2;
        Matrix B(d, 0);
        for (const auto& [mag, id] : cand) {
            if (static_cast<Index>(c1.size() + c2.size()) == k) break;
            Vector u = id < k ? A1.col(id) : A2.col(id - k);
            Vector r = u - B * (B.transpose() * u);
            if (r.norm() < 0.5) continue;
            B.conservativeResize(Eigen::NoChange, B.cols() + 1);
            B.col(B.cols() - 1) = r.normalized();
            (id < k ? c1 : c2).push_back(id % k);
        }
        if (static_cast<Index>(c1.size() + c2.size()) < k)
            throw DegenerateSpectrumError("power_method: branches picked overlapping directions");
        b.eig_magnitudes.resize(k);
        std::sort(c1.begin(), c1.end());
        std::sort(c2.begin(), c2.end());
        b.k1 = static_cast<Index>(c1.size());
        b.k2 = static_cast<Index>(c2.size());
        Matrix Vp1(d, b.k1), Vp2(d, b.k2);
        Index pos = 0;
        for (Index j = 0; j < b.k1; ++j) {
            Vp1.col(j) = A1.col(c1[j]);
            b.eig_magnitudes(pos++) = std::abs(A1.col(c1[j]).dot(P1.col(c1[j])));
        }
        for (Index j = 0; j < b.k2; ++j) {
            Vp2.col(j) = A2.col(c2[j]);
            b.eig_magnitudes(pos++) = std::abs(A2.col(c2[j]).dot(P2.col(c2[j])));
        }
        b.V.resize(d, k);
        b.V.leftCols(b.k1) = Vp1;
        if (b.k2 > 0) {
            Matrix resid = Vp2 - Vp1 * (Vp1.transpose() * Vp2);
            Vector sv = singular_values(resid);
            if (sv(sv.size() - 1) < 1e-8)
                throw DegenerateSpectrumError("power_method: branches picked overlapping directions");
            b.V.rightCols(b.k2) = orthonormalize(resid);
        }
    };

    Matrix prev;
    for (int t = 1; t <= cfg.max_iters; ++t) {
        Matrix P1 = apply(V1), P2 = apply(V2);
        SubspaceBasis cur;
        pick(V1, P1, V2, P2, cur);
        out.iterations = t;
        if (prev.size()) {
            out.last_change = subspace_distance(prev, cur.V);
            if (out.last_change < cfg.tol) {
                prev = cur.V;
                out.V = cur.V;
                out.eig_magnitudes = cur.eig_magnitudes;
                out.k1 = cur.k1;
                out.k2 = cur.k2;
                break;
            }
        }
        prev = cur.V;
        out.V = cur.V;
        out.eig_magnitudes = cur.eig_magnitudes;
        out.k1 = cur.k1;
        out.k2 = cur.k2;
        V1 = orthonormalize(out.C * V1 + P1);
        V2 = orthonormalize(out.C * V2 - P2);
    }
    if (out.eig_magnitudes.minCoeff() < 1e-10 * out.C)
        throw DegenerateSpectrumError("power_method: fewer than k distinguishable directions");
    return out;
}

} // namespace nnrecover

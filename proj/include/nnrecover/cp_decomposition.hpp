#pragma once

#include <algorithm>
#include <complex>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "tensor3.hpp"

namespace nnrecover {

/// Symmetric CP factors: T ~ sum_i weights_i u_i (x) u_i (x) u_i.
struct CpFactors {
    Vector weights;
    Matrix factors; ///< unit-norm columns

    struct Diagnostics {
        int slice_a = -1, slice_b = -1;
        double separation = 0.0;     ///< min relative gap between pencil eigenvalues
        double max_residual = 0.0;   ///< max |M_a x - mu M_b x| / (|M_a| + |mu| |M_b|)
        double max_imag_ratio = 0.0; ///< max |Im mu| / |Re mu|
        bool complex_flag = false;
        double reconstruction_error = 0.0; ///< |T - sum|_F / |T|_F
    } diagnostics;
};

/// sum_r w_r u_r^{(x)3} least-squares weights for fixed unit factors.
inline Vector symmetric_cp_weights(const Tensor3& T, const Matrix& F) {
    const Index m = T.dim(0), k = F.cols();
    Matrix design(m * m * m, k);
    Vector rhs(m * m * m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            for (Index l = 0; l < m; ++l) {
                Index row = (i * m + j) * m + l;
                rhs(row) = T(i, j, l);
                for (Index r = 0; r < k; ++r) design(row, r) = F(i, r) * F(j, r) * F(l, r);
            }
    return design.colPivHouseholderQr().solve(rhs);
}

/**
 * @brief Symmetric alternating least squares starting from @p cp.
 *
 * Each sweep solves the mode-1 least-squares problem with the other two modes
 * fixed at the current factors, renormalizes, and refits the weights. A sweep
 * is kept only if it lowers the reconstruction error, so the error never
 * increases.
 */
inline void refine_symmetric_als(const Tensor3& T, CpFactors& cp, int iters);

/**
 * @brief Rank-k symmetric CP decomposition via a random-projection pencil.
 *
 * L random unit vectors g produce slices M = T(I, I, g). The slices are
 * compressed onto the top-k left singular subspace of the unfolding, the
 * best-conditioned ones are paired, and the pair whose pencil eigenvalues are
 * best separated is solved with a dense nonsymmetric eigensolver. Each
 * eigenvector x of M_a x = mu M_b x yields a factor u ~ M_b x; the weights
 * are then fitted by least squares. Factors are returned sorted by |weight|,
 * descending, and are determined up to the joint flip (w, u) -> (-w, -u).
 */
inline CpFactors decompose_rank_k(const Tensor3& T, Index k, int L = 100, std::uint64_t seed = 0,
                                  int refine_iters = 0) {
    if (!T.cubic()) throw DimensionError("decompose_rank_k: tensor must be cubic");
    const Index m = T.dim(0);
    if (k < 1 || k > m) throw DimensionError("decompose_rank_k: need 1 <= k <= dim");
    if (L < 2) throw DimensionError("decompose_rank_k: need at least two projections");

    // compression basis P (m x k)
    Eigen::JacobiSVD<Matrix> usvd(T.flatten(), Eigen::ComputeThinU);
    Matrix P = usvd.matrixU().leftCols(k);
    if (usvd.singularValues()(0) == 0.0)
        throw DecompositionError("decompose_rank_k: zero tensor");

    Engine eng = make_engine(seed, "cp-projections");
    std::vector<Matrix> slices;
    std::vector<double> cond;
    for (int l = 0; l < L; ++l) {
        Vector g = unit_sphere(eng, m);
        Matrix s = P.transpose() * T.slice(g) * P;
        Vector sv = singular_values(s);
        slices.push_back(std::move(s));
        cond.push_back(sv(0) > 0.0 ? sv(k - 1) / sv(0) : 0.0);
    }
    std::vector<int> order(static_cast<std::size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cond[a] > cond[b]; });
    if (cond[order[0]] < 1e-10) {
        std::ostringstream os;
        os << "decompose_rank_k: slice pencil is numerically rank deficient (best sigma_min/sigma_max = "
           << cond[order[0]] << ")";
        throw DecompositionError(os.str());
    }

    const double tn = T.frobenius_norm();

    // Every ordered pair of the best-conditioned slices is solved; the pair
    // whose factors reconstruct T best wins.
    const int top = std::min(L, 8);
    CpFactors best;
    best.diagnostics.reconstruction_error = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int ib = 0; ib < top; ++ib) {
        const int b = order[ib];
        if (cond[b] < 1e-10) continue;
        const Matrix& Mb = slices[b];
        Eigen::PartialPivLU<Matrix> lu(Mb);
        for (int ia = 0; ia < top; ++ia) {
            const int a = order[ia];
            if (a == b) continue;
            const Matrix& Ma = slices[a];
            Eigen::EigenSolver<Matrix> es(lu.solve(Ma));
            if (es.info() != Eigen::Success) continue;
            const Eigen::VectorXcd mu = es.eigenvalues();
            const Eigen::MatrixXcd X = es.eigenvectors();

            CpFactors cand;
            auto& dg = cand.diagnostics;
            dg.slice_a = a;
            dg.slice_b = b;
            const double scale = mu.cwiseAbs().maxCoeff();
            dg.separation = k == 1 ? 1.0 : std::numeric_limits<double>::infinity();
            for (Index i = 0; i < k; ++i)
                for (Index j = i + 1; j < k; ++j)
                    dg.separation = std::min(dg.separation, std::abs(mu(i) - mu(j)) / scale);
            const double na = spectral_norm(Ma), nb = spectral_norm(Mb);
            Matrix U(k, k);
            bool ok = true;
            for (Index i = 0; i < k && ok; ++i) {
                const double re = mu(i).real(), im = mu(i).imag();
                const double ratio = std::abs(im) / std::max(std::abs(re), 1e-300);
                dg.max_imag_ratio = std::max(dg.max_imag_ratio, ratio);
                if (ratio > 1e-6) dg.complex_flag = true;
                // a conjugate pair spans a real 2-plane: use the real part for
                // the member with positive imaginary part, the imaginary part
                // for its partner
                Vector x = im < 0.0 && ratio > 1e-6 ? Vector(X.col(i).imag()) : Vector(X.col(i).real());
                if (x.norm() == 0.0) x = X.col(i).real();
                const double res = (Ma * x - re * (Mb * x)).norm() /
                                   ((na + std::abs(re) * nb) * std::max(x.norm(), 1e-300));
                dg.max_residual = std::max(dg.max_residual, res);
                Vector u = Mb * x;
                const double nrm = u.norm();
                if (!(nrm > 0.0)) ok = false;
                else U.col(i) = u / nrm;
            }
            if (!ok) continue;
            Matrix F = P * U;
            for (Index i = 0; i < k; ++i) F.col(i).normalize();
            cand.factors = F;
            cand.weights = symmetric_cp_weights(T, F);
            if (!cand.weights.allFinite()) continue;
            dg.reconstruction_error = (T - symmetric_rank_sum(cand.weights, F)).frobenius_norm() / tn;
            if (!std::isfinite(dg.reconstruction_error)) continue;
            // prefer real spectra, then smaller reconstruction error
            const bool better = !any || (best.diagnostics.complex_flag && !dg.complex_flag) ||
                                (best.diagnostics.complex_flag == dg.complex_flag &&
                                 dg.reconstruction_error < best.diagnostics.reconstruction_error);
            if (better) {
                best = std::move(cand);
                any = true;
            }
        }
    }
    if (!any) throw DecompositionError("decompose_rank_k: eigensolver failed on all slice pairs");
    if (!best.diagnostics.complex_flag && best.diagnostics.max_residual > 1e-8) {
        std::ostringstream os;
        os << "decompose_rank_k: pencil residual " << best.diagnostics.max_residual << " exceeds 1e-8";
        throw DecompositionError(os.str());
    }

    if (refine_iters > 0) refine_symmetric_als(T, best, refine_iters);

    std::vector<Index> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return std::abs(best.weights(a)) > std::abs(best.weights(b)); });
    CpFactors out = best;
    for (Index r = 0; r < k; ++r) {
        out.weights(r) = best.weights(idx[r]);
        out.factors.col(r) = best.factors.col(idx[r]);
    }
    return out;
}

inline void refine_symmetric_als(const Tensor3& T, CpFactors& cp, int iters) {
    const Index m = T.dim(0), k = cp.factors.cols();
    const Matrix T1 = T.flatten(); // m x m^2, column j * m + l
    const double tn = T.frobenius_norm();
    auto error = [&](const Vector& w, const Matrix& F) {
        return (T - symmetric_rank_sum(w, F)).frobenius_norm() / tn;
    };
    double err = error(cp.weights, cp.factors);
    for (int it = 0; it < iters; ++it) {
        const Matrix& A = cp.factors;
        Matrix KR(m * m, k);
        for (Index r = 0; r < k; ++r)
            for (Index j = 0; j < m; ++j)
                for (Index l = 0; l < m; ++l) KR(j * m + l, r) = A(j, r) * A(l, r);
        Matrix G = (A.transpose() * A).cwiseProduct(A.transpose() * A);
        Matrix Anew = (T1 * KR) * G.completeOrthogonalDecomposition().pseudoInverse();
        bool ok = true;
        for (Index r = 0; r < k; ++r) {
            double nrm = Anew.col(r).norm();
            if (!(nrm > 0.0) || !std::isfinite(nrm)) ok = false;
            else Anew.col(r) /= nrm;
        }
        if (!ok) break;
        Vector w = symmetric_cp_weights(T, Anew);
        double e = error(w, Anew);
        if (!(e < err)) break;
        const bool converged = err - e < 1e-12 * std::max(1.0, err);
        cp.factors = Anew;
        cp.weights = w;
        err = e;
        if (converged) break;
    }
    cp.diagnostics.reconstruction_error = err;
}

} // namespace nnrecover

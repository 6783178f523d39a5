#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace nnrecover {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin Q factor of a Householder QR, with columns flipped so that diag(R) > 0.
/// For a Gaussian input this makes Q Haar-distributed.
inline Matrix orthonormalize(const Matrix& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix& r = qr.matrixQR();
    for (Index j = 0; j < a.cols(); ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

/// ||U U^T - V V^T||_2 for two orthonormal d x k bases, computed as
/// sqrt(1 - sigma_min(U^T V)^2) without forming d x d projectors.
inline double subspace_distance(const Matrix& u, const Matrix& v) {
    if (u.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(u.transpose() * v);
    double smin = svd.singularValues().minCoeff();
    return std::sqrt(std::max(0.0, 1.0 - smin * smin));
}

inline double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

/// Singular values, descending.
inline Vector singular_values(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues();
}

inline double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

} // namespace nnrecover

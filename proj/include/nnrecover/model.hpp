#pragma once

#include <cstdint>
#include <numeric>

#include "activations.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace nnrecover {

/**
 * @brief Ground-truth one-hidden-layer network y = sum_i v_i phi(w_i^T x).
 */
struct TeacherNetwork {
    Matrix W;           ///< d x k, column i is w_i
    Vector v;           ///< entries in {-1, +1}
    ActivationSpec act;
    double kappa = 1.0; ///< requested condition number (metadata)
    std::uint64_t seed = 0;

    Index d() const { return W.rows(); }
    Index k() const { return W.cols(); }
};

struct ConditionNumbers {
    Vector sigma; ///< singular values, descending
    double kappa = 1.0;
    double lambda = 1.0;
    double nu = 1.0;
    double v_max = 1.0;
    double v_min = 1.0;
};

/// n Gaussian inputs stored as one column-major d x n block, plus labels.
struct SampleSet {
    Matrix X;
    Vector y;
    std::uint64_t seed = 0;

    Index n() const { return X.cols(); }
    Index d() const { return X.rows(); }

    /// Contiguous block [begin, begin + count) of samples.
    SampleSet slice(Index begin, Index count) const {
        if (begin < 0 || count < 0 || begin + count > n())
            throw DimensionError("SampleSet::slice out of range");
        return {X.middleCols(begin, count), y.segment(begin, count), seed};
    }
};

/// Network output for every column of X.
inline Vector forward(const Matrix& W, const Vector& v, const ActivationSpec& act,
                      const Matrix& X) {
    if (W.rows() != X.rows() || W.cols() != v.size())
        throw DimensionError("forward: shape mismatch");
    Matrix z = W.transpose() * X;
    z = z.unaryExpr(act.phi);
    return z.transpose() * v;
}

inline TeacherNetwork generate_teacher(Index d, Index k, double kappa, std::uint64_t seed,
                                       const ActivationSpec& act = squared_relu()) {
    if (k < 1 || d < 1 || k > d)
        throw DimensionError("generate_teacher: need 1 <= k <= d");
    if (!(kappa >= 1.0)) throw DimensionError("generate_teacher: kappa must be >= 1");
    Engine eng = make_engine(seed, "teacher");
    Matrix u = orthonormalize(gaussian_matrix(eng, d, k));
    Matrix vr = orthonormalize(gaussian_matrix(eng, k, k));
    Vector s(k);
    for (Index i = 0; i < k; ++i)
        s(i) = k == 1 ? 1.0 : 1.0 + (kappa - 1.0) * static_cast<double>(i) / (k - 1.0);
    std::bernoulli_distribution coin(0.5);
    Vector v(k);
    for (Index i = 0; i < k; ++i) v(i) = coin(eng) ? 1.0 : -1.0;
    return {u * s.asDiagonal() * vr.transpose(), v, act, k == 1 ? 1.0 : kappa, seed};
}

inline SampleSet sample(const TeacherNetwork& teacher, Index n, std::uint64_t seed) {
    if (n < 1) throw DimensionError("sample: n must be >= 1");
    Engine eng = make_engine(seed, "samples");
    SampleSet s;
    s.X = gaussian_matrix(eng, teacher.d(), n);
    s.y = forward(teacher.W, teacher.v, teacher.act, s.X);
    s.seed = seed;
    return s;
}

inline ConditionNumbers condition_numbers(const Matrix& W, const Vector& v) {
    ConditionNumbers c;
    c.sigma = singular_values(W);
    const Index k = c.sigma.size();
    if (k == 0) throw DimensionError("condition_numbers: empty weight matrix");
    const double s1 = c.sigma(0), sk = c.sigma(k - 1);
    if (!(sk > 1e-12 * s1)) throw ConditioningError("condition_numbers: W is rank deficient");
    c.kappa = s1 / sk;
    c.lambda = 1.0;
    for (Index i = 0; i < k; ++i) c.lambda *= c.sigma(i) / sk;
    c.v_max = v.cwiseAbs().maxCoeff();
    c.v_min = v.cwiseAbs().minCoeff();
    c.nu = c.v_max / c.v_min;
    return c;
}

inline ConditionNumbers condition_numbers(const TeacherNetwork& t) {
    return condition_numbers(t.W, t.v);
}

} // namespace nnrecover

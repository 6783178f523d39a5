#pragma once

#include <ostream>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace nnrecover {

/**
 * @brief Dense a x b x c array of doubles, row-major over (i, j, l).
 */
class Tensor3 {
  public:
    Tensor3() = default;
    Tensor3(Index a, Index b, Index c) : a_(a), b_(b), c_(c), data_(a * b * c, 0.0) {
        if (a < 0 || b < 0 || c < 0) throw DimensionError("Tensor3: negative dimension");
    }
    explicit Tensor3(Index m) : Tensor3(m, m, m) {}

    Index dim(int mode) const { return mode == 0 ? a_ : mode == 1 ? b_ : c_; }
    Index size() const { return static_cast<Index>(data_.size()); }
    bool cubic() const { return a_ == b_ && b_ == c_; }

    double& operator()(Index i, Index j, Index l) { return data_[(i * b_ + j) * c_ + l]; }
    double operator()(Index i, Index j, Index l) const { return data_[(i * b_ + j) * c_ + l]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Tensor3& operator+=(const Tensor3& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor3& operator-=(const Tensor3& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor3& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }
    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : data_) s += x * x;
        return std::sqrt(s);
    }

    /// Mode-1 unfolding: a x (b c), column index j * c + l.
    Matrix flatten() const {
        Matrix m(a_, b_ * c_);
        for (Index i = 0; i < a_; ++i)
            for (Index jl = 0; jl < b_ * c_; ++jl) m(i, jl) = data_[i * b_ * c_ + jl];
        return m;
    }

    /// True when T is invariant under all 6 index permutations up to @p tol
    /// (absolute, relative to the largest entry).
    bool is_symmetric(double tol = 1e-12) const {
        if (!cubic()) return false;
        double scale = 0.0;
        for (double x : data_) scale = std::max(scale, std::abs(x));
        const double lim = tol * std::max(1.0, scale);
        for (Index i = 0; i < a_; ++i)
            for (Index j = 0; j < a_; ++j)
                for (Index l = 0; l < a_; ++l) {
                    double t = (*this)(i, j, l);
                    if (std::abs(t - (*this)(i, l, j)) > lim || std::abs(t - (*this)(j, i, l)) > lim ||
                        std::abs(t - (*this)(j, l, i)) > lim || std::abs(t - (*this)(l, i, j)) > lim ||
                        std::abs(t - (*this)(l, j, i)) > lim)
                        return false;
                }
        return true;
    }

    /// Matrix slice T(I, I, g).
    Matrix slice(const Vector& g) const {
        if (g.size() != c_) throw DimensionError("Tensor3::slice: vector length mismatch");
        Matrix m(a_, b_);
        for (Index i = 0; i < a_; ++i)
            for (Index j = 0; j < b_; ++j) {
                double s = 0.0;
                for (Index l = 0; l < c_; ++l) s += (*this)(i, j, l) * g(l);
                m(i, j) = s;
            }
        return m;
    }

    /// Flat CSV dump "i,j,l,value" for debugging.
    void write_csv(std::ostream& os) const {
        os << "i,j,l,value\n";
        os.precision(17);
        for (Index i = 0; i < a_; ++i)
            for (Index j = 0; j < b_; ++j)
                for (Index l = 0; l < c_; ++l) os << i << ',' << j << ',' << l << ',' << (*this)(i, j, l) << '\n';
    }

  private:
    void check_same(const Tensor3& o) const {
        if (a_ != o.a_ || b_ != o.b_ || c_ != o.c_) throw DimensionError("Tensor3: shape mismatch");
    }

    Index a_ = 0, b_ = 0, c_ = 0;
    std::vector<double> data_;
};

/// sum_j (v (x) e_j (x) e_j + e_j (x) v (x) e_j + e_j (x) e_j (x) v)
inline Tensor3 tilde_outer_vec(const Vector& v) {
    const Index m = v.size();
    if (m < 1) throw DimensionError("tilde_outer_vec: empty vector");
    Tensor3 t(m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            t(i, j, j) += v(i);
            t(j, i, j) += v(i);
            t(j, j, i) += v(i);
        }
    return t;
}

/// T[i,j,l] = a_i B_jl + a_j B_il + a_l B_ij for symmetric B.
inline Tensor3 tilde_outer_vec_mat(const Vector& a, const Matrix& B) {
    const Index m = a.size();
    if (B.rows() != m || B.cols() != m) throw DimensionError("tilde_outer_vec_mat: shape mismatch");
    if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, B.cwiseAbs().maxCoeff()))
        throw DimensionError("tilde_outer_vec_mat: B must be symmetric");
    Tensor3 t(m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            for (Index l = 0; l < m; ++l) t(i, j, l) = a(i) * B(j, l) + a(j) * B(i, l) + a(l) * B(i, j);
    return t;
}

/// sum_i w_i u_i (x) u_i (x) u_i for the columns u_i of U.
inline Tensor3 symmetric_rank_sum(const Vector& w, const Matrix& U) {
    if (w.size() != U.cols()) throw DimensionError("symmetric_rank_sum: shape mismatch");
    const Index m = U.rows();
    Tensor3 t(m);
    for (Index r = 0; r < U.cols(); ++r)
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j) {
                double s = w(r) * U(i, r) * U(j, r);
                for (Index l = 0; l < m; ++l) t(i, j, l) += s * U(l, r);
            }
    return t;
}

/**
 * @brief T(A, B, C)[i, j, l] = sum T[i', j', l'] A[i', i] B[j', j] C[l', l].
 *
 * Computed as three staged mode products. Vectors are passed as one-column
 * matrices.
 */
inline Tensor3 contract(const Tensor3& T, const Matrix& A, const Matrix& B, const Matrix& C) {
    const Index m0 = T.dim(0), m1 = T.dim(1), m2 = T.dim(2);
    if (A.rows() != m0 || B.rows() != m1 || C.rows() != m2)
        throw DimensionError("contract: slot rows must match tensor dimensions");
    const Index a = A.cols(), b = B.cols(), c = C.cols();
    // stage 1: mode 2 -> t1[i', j', l]
    Tensor3 t1(m0, m1, c);
    for (Index i = 0; i < m0; ++i)
        for (Index j = 0; j < m1; ++j)
            for (Index l = 0; l < c; ++l) {
                double s = 0.0;
                for (Index q = 0; q < m2; ++q) s += T(i, j, q) * C(q, l);
                t1(i, j, l) = s;
            }
    // stage 2: mode 1 -> t2[i', j, l]
    Tensor3 t2(m0, b, c);
    for (Index i = 0; i < m0; ++i)
        for (Index j = 0; j < b; ++j)
            for (Index l = 0; l < c; ++l) {
                double s = 0.0;
                for (Index q = 0; q < m1; ++q) s += t1(i, q, l) * B(q, j);
                t2(i, j, l) = s;
            }
    // stage 3: mode 0
    Tensor3 out(a, b, c);
    for (Index i = 0; i < a; ++i)
        for (Index j = 0; j < b; ++j)
            for (Index l = 0; l < c; ++l) {
                double s = 0.0;
                for (Index q = 0; q < m0; ++q) s += t2(q, j, l) * A(q, i);
                out(i, j, l) = s;
            }
    return out;
}

/// T(a, a, a) for a symmetric cubic tensor.
inline double cubic_form(const Tensor3& T, const Vector& a) {
    return a.dot(T.slice(a) * a);
}

struct OperatorNormEstimate {
    double lower = 0.0; ///< best |T(a,a,a)| found by power iteration
    double upper = 0.0; ///< spectral norm of the mode-1 unfolding
    Vector argmax;
};

/**
 * @brief Bracket max_{|a|=1} |T(a,a,a)| for a symmetric tensor.
 *
 * The lower end comes from projected power iteration a <- T(a,a,I)/|.| from
 * @p restarts random starts; the upper end is the unfolding norm.
 */
inline OperatorNormEstimate operator_norm_estimate(const Tensor3& T, int restarts = 10,
                                                   std::uint64_t seed = 0, int iters = 200) {
    if (!T.cubic()) throw DimensionError("operator_norm_estimate: tensor must be cubic");
    OperatorNormEstimate est;
    const Index m = T.dim(0);
    est.upper = spectral_norm(T.flatten());
    est.argmax = Vector::Zero(m);
    if (est.upper == 0.0) return est;
    Engine eng = make_engine(seed, "tensor-norm");
    for (int r = 0; r < restarts; ++r) {
        Vector a = unit_sphere(eng, m);
        for (int it = 0; it < iters; ++it) {
            Vector next = T.slice(a) * a;
            double nrm = next.norm();
            if (nrm == 0.0) break;
            next /= nrm;
            double change = std::min((next - a).norm(), (next + a).norm());
            a = next;
            if (change < 1e-14) break;
        }
        double val = std::abs(cubic_form(T, a));
        if (val > est.lower) {
            est.lower = val;
            est.argmax = a;
        }
    }
    return est;
}

} // namespace nnrecover

#pragma once

#include <map>
#include <memory>
#include <vector>

#include "activations.hpp"
#include "model.hpp"
#include "properties.hpp"
#include "tensor3.hpp"

namespace nnrecover {

/// What a single tensor mode of a score moment is contracted with.
enum class SlotKind {
    Identity, ///< left open, contributes a d-dimensional output mode
    Alpha,    ///< contracted with the request's alpha vector
    Basis,    ///< contracted with the request's d x k basis V (k-dimensional output mode)
};

/**
 * @brief A contracted score moment M_j(B_1, ..., B_j).
 *
 * The output has one mode per Identity/Basis slot, in slot order.
 */
struct MomentRequest {
    int order = 2;
    std::vector<SlotKind> slots;
    Vector alpha;
    Matrix V;
};

/// Dense row-major result of a contraction.
struct Moment {
    std::vector<Index> dims;
    std::vector<double> data;

    Index rank() const { return static_cast<Index>(dims.size()); }
    double scalar() const {
        expect_rank(0);
        return data[0];
    }
    Vector vector() const {
        expect_rank(1);
        return Eigen::Map<const Vector>(data.data(), dims[0]);
    }
    Matrix matrix() const {
        expect_rank(2);
        Matrix m(dims[0], dims[1]);
        for (Index i = 0; i < dims[0]; ++i)
            for (Index j = 0; j < dims[1]; ++j) m(i, j) = data[i * dims[1] + j];
        return m;
    }
    Tensor3 tensor() const {
        expect_rank(3);
        Tensor3 t(dims[0], dims[1], dims[2]);
        t.data() = data;
        return t;
    }

  private:
    void expect_rank(Index r) const {
        if (rank() != r) throw DimensionError("Moment: unexpected rank");
    }
};

namespace moment_detail {

inline void validate(const MomentRequest& req, Index d) {
    if (req.order < 1 || req.order > 4) throw DimensionError("moment order must be in 1..4");
    if (static_cast<int>(req.slots.size()) != req.order)
        throw DimensionError("moment request: slot count must equal the order");
    for (auto s : req.slots) {
        if (s == SlotKind::Alpha && req.alpha.size() != d)
            throw DimensionError("moment request: alpha has wrong length");
        if (s == SlotKind::Basis && req.V.rows() != d)
            throw DimensionError("moment request: V has wrong row count");
    }
}

/// He_h(a) for N(0, s): probabilists' Hermite polynomial with variance s.
inline double hermite(int h, double a, double s) {
    switch (h) {
    case 0: return 1.0;
    case 1: return a;
    case 2: return a * a - s;
    case 3: return a * a * a - 3.0 * s * a;
    default: return a * a * a * a - 6.0 * s * a * a + 3.0 * s * s;
    }
}

/// State of one open (Identity/Basis) slot in a pairing term.
struct SlotState {
    enum Kind { Free, WithAlpha, Paired } kind = Free;
    int partner = -1; // index into the open-slot list
};

/// One term of the Hermite expansion: a partial pairing of all slots,
/// with the alpha-only part summed into a Hermite polynomial.
struct Term {
    std::vector<SlotState> states;
    int pairs = 0;      // open-open pairs
    int with_alpha = 0; // open slots paired with an alpha slot
};

inline void enumerate(std::vector<SlotState>& st, std::size_t pos, int pairs, int wa, int q,
                      std::vector<Term>& out) {
    if (pos == st.size()) {
        out.push_back({st, pairs, wa});
        return;
    }
    if (st[pos].partner >= 0 && st[pos].kind == SlotState::Paired) {
        enumerate(st, pos + 1, pairs, wa, q, out);
        return;
    }
    st[pos] = {SlotState::Free, -1};
    enumerate(st, pos + 1, pairs, wa, q, out);
    if (wa < q) {
        st[pos] = {SlotState::WithAlpha, -1};
        enumerate(st, pos + 1, pairs, wa + 1, q, out);
    }
    for (std::size_t t = pos + 1; t < st.size(); ++t) {
        if (st[t].kind == SlotState::Paired && st[t].partner >= 0) continue;
        st[pos] = {SlotState::Paired, static_cast<int>(t)};
        st[t] = {SlotState::Paired, static_cast<int>(pos)};
        enumerate(st, pos + 1, pairs + 1, wa, q, out);
        st[t] = {SlotState::Free, -1};
    }
    st[pos] = {SlotState::Free, -1};
}

inline std::vector<Term> expansion(int open, int q) {
    std::vector<SlotState> st(static_cast<std::size_t>(open));
    std::vector<Term> out;
    enumerate(st, 0, 0, 0, q, out);
    return out;
}

inline double falling(int q, int t) {
    double r = 1.0;
    for (int i = 0; i < t; ++i) r *= q - i;
    return r;
}

inline std::vector<double> pairwise_sum(std::vector<std::vector<double>>& parts, std::size_t lo,
                                        std::size_t hi) {
    if (hi - lo == 1) return std::move(parts[lo]);
    std::size_t mid = lo + (hi - lo) / 2;
    auto a = pairwise_sum(parts, lo, mid);
    auto b = pairwise_sum(parts, mid, hi);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

/// Sum_i w_i (x)_{s} R_s[:, i] as a dense row-major array (free-slot order).
inline std::vector<double> weighted_outer(const std::vector<const Matrix*>& R, const Vector& w) {
    const std::size_t f = R.size();
    if (f == 0) return {w.sum()};
    if (f == 1) {
        Vector v = *R[0] * w;
        return {v.data(), v.data() + v.size()};
    }
    if (f == 2) {
        Matrix m = (*R[0]) * w.asDiagonal() * R[1]->transpose();
        std::vector<double> out(static_cast<std::size_t>(m.size()));
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
        return out;
    }
    // peel the last slot: one lower-rank accumulation per index of that mode
    const Matrix& last = *R.back();
    std::vector<const Matrix*> head(R.begin(), R.end() - 1);
    const Index b = last.rows();
    std::vector<double> out;
    std::vector<std::vector<double>> per(static_cast<std::size_t>(b));
    for (Index l = 0; l < b; ++l) {
        Vector wl = w.cwiseProduct(last.row(l).transpose());
        per[l] = weighted_outer(head, wl);
    }
    const std::size_t hsize = per[0].size();
    out.resize(hsize * b);
    for (std::size_t h = 0; h < hsize; ++h)
        for (Index l = 0; l < b; ++l) out[h * b + l] = per[l][h];
    return out;
}

} // namespace moment_detail

/**
 * @brief Empirical contracted score moment (1/n) sum y S_j(x)(B_1, ..., B_j).
 *
 * S_j is the j-th Hermite tensor (x, xx^T - I, x^3 - x~I, x^4 - (xx)~I + I~I).
 * Expanding it as a signed sum over partial pairings of its modes lets every
 * term be evaluated from r_s = B_s^T x, c_s = B_s^T alpha, a = alpha^T x and
 * the Gram blocks B_s^T B_t, so no d^j array is ever formed unless the
 * request itself asks for one. Samples are processed in fixed-size chunks and
 * the chunk results are pairwise-summed, so the result depends only on the
 * data.
 */
inline Moment score_contraction(const SampleSet& S, const MomentRequest& req) {
    using namespace moment_detail;
    const Index d = S.d(), n = S.n();
    if (n < 1) throw DimensionError("score_contraction: empty sample set");
    validate(req, d);

    std::vector<SlotKind> open;
    int q = 0;
    for (auto s : req.slots) {
        if (s == SlotKind::Alpha) ++q;
        else open.push_back(s);
    }
    const int m = static_cast<int>(open.size());
    Moment out;
    for (auto s : open) out.dims.push_back(s == SlotKind::Identity ? d : req.V.cols());
    std::size_t total = 1;
    for (Index x : out.dims) total *= static_cast<std::size_t>(x);

    // constants per open slot
    const Matrix Id = Matrix::Identity(d, d);
    auto basis = [&](int s) -> const Matrix& { return open[s] == SlotKind::Identity ? Id : req.V; };
    std::vector<Vector> c(static_cast<std::size_t>(m));
    if (q > 0)
        for (int s = 0; s < m; ++s) c[s] = basis(s).transpose() * req.alpha;
    std::map<std::pair<int, int>, Matrix> gram;
    const double alpha_sq = q > 0 ? req.alpha.squaredNorm() : 0.0;

    auto terms = expansion(m, q);
    for (auto& t : terms)
        for (int s = 0; s < m; ++s)
            if (t.states[s].kind == SlotState::Paired && t.states[s].partner > s) {
                auto key = std::make_pair(s, t.states[s].partner);
                if (!gram.count(key)) gram[key] = basis(s).transpose() * basis(t.states[s].partner);
            }

    std::vector<Index> stride(static_cast<std::size_t>(m), 1);
    for (int s = m - 2; s >= 0; --s) stride[s] = stride[s + 1] * out.dims[s + 1];

    constexpr Index kChunk = 4096;
    std::vector<std::vector<double>> parts;
    for (Index begin = 0; begin < n; begin += kChunk) {
        const Index len = std::min(kChunk, n - begin);
        const auto Xc = S.X.middleCols(begin, len);
        Vector wy = S.y.segment(begin, len) / static_cast<double>(n);
        Vector a;
        if (q > 0) a = Xc.transpose() * req.alpha;
        Matrix Xm = Xc;
        Matrix VX;
        bool need_vx = false;
        for (auto s : open) need_vx |= s == SlotKind::Basis;
        if (need_vx) VX = req.V.transpose() * Xm;

        std::vector<double> acc(total, 0.0);
        std::map<std::pair<std::vector<int>, int>, std::vector<double>> cache;
        for (const auto& t : terms) {
            const int h = q - t.with_alpha;
            const double coef = ((t.pairs + t.with_alpha) % 2 ? -1.0 : 1.0) * falling(q, t.with_alpha);
            std::vector<int> free;
            for (int s = 0; s < m; ++s)
                if (t.states[s].kind == SlotState::Free) free.push_back(s);
            auto key = std::make_pair(free, h);
            auto it = cache.find(key);
            if (it == cache.end()) {
                Vector w = wy;
                if (h > 0)
                    for (Index i = 0; i < len; ++i) w(i) *= hermite(h, a(i), alpha_sq);
                std::vector<const Matrix*> R;
                for (int s : free) R.push_back(open[s] == SlotKind::Identity ? &Xm : &VX);
                it = cache.emplace(key, weighted_outer(R, w)).first;
            }
            const auto& E = it->second;
            // scatter into the output
            std::vector<Index> idx(static_cast<std::size_t>(m), 0);
            for (std::size_t flat = 0; flat < total; ++flat) {
                std::size_t rem = flat;
                for (int s = 0; s < m; ++s) {
                    idx[s] = static_cast<Index>(rem / stride[s]);
                    rem %= stride[s];
                }
                double v = coef;
                std::size_t eidx = 0;
                for (int s = 0; s < m && v != 0.0; ++s) {
                    const auto& st = t.states[s];
                    if (st.kind == SlotState::Free) eidx = eidx * out.dims[s] + idx[s];
                    else if (st.kind == SlotState::WithAlpha) v *= c[s](idx[s]);
                    else if (st.partner > s) v *= gram.at({s, st.partner})(idx[s], idx[st.partner]);
                }
                if (v != 0.0) acc[flat] += v * E[eidx];
            }
        }
        parts.push_back(std::move(acc));
    }
    out.data = pairwise_sum(parts, 0, parts.size());
    return out;
}

/**
 * @brief Population value of the same contraction for a teacher:
 * sum_i v_i m_j(|w_i|) (x)_s (B_s^T wbar_i), with alpha slots giving
 * (alpha^T wbar_i) factors.
 */
inline std::vector<std::array<double, 4>> column_moments(const TeacherNetwork& t) {
    std::vector<std::array<double, 4>> m;
    for (Index i = 0; i < t.k(); ++i) m.push_back(gaussian_moments(t.act, t.W.col(i).norm()).m);
    return m;
}

/// @p m holds m_1..m_4 at |w_i| for every column (see column_moments).
inline Moment population_moment(const TeacherNetwork& t, const MomentRequest& req,
                                 const std::vector<std::array<double, 4>>& m) {
    const Index d = t.d();
    moment_detail::validate(req, d);
    Moment out;
    for (auto s : req.slots)
        if (s != SlotKind::Alpha) out.dims.push_back(s == SlotKind::Identity ? d : req.V.cols());
    std::size_t total = 1;
    for (Index x : out.dims) total *= static_cast<std::size_t>(x);
    out.data.assign(total, 0.0);

    for (Index i = 0; i < t.k(); ++i) {
        const double sigma = t.W.col(i).norm();
        const Vector wbar = t.W.col(i) / sigma;
        double coef = t.v(i) * m.at(static_cast<std::size_t>(i))[req.order - 1];
        std::vector<Vector> vecs;
        for (auto s : req.slots) {
            if (s == SlotKind::Alpha) coef *= req.alpha.dot(wbar);
            else if (s == SlotKind::Identity) vecs.push_back(wbar);
            else vecs.push_back(req.V.transpose() * wbar);
        }
        std::vector<Index> idx(vecs.size(), 0);
        for (std::size_t flat = 0; flat < total; ++flat) {
            double v = coef;
            for (std::size_t s = 0; s < vecs.size(); ++s) v *= vecs[s](idx[s]);
            out.data[flat] += v;
            for (int s = static_cast<int>(vecs.size()) - 1; s >= 0; --s) {
                if (++idx[s] < out.dims[s]) break;
                idx[s] = 0;
            }
        }
    }
    return out;
}

inline Moment population_moment(const TeacherNetwork& t, const MomentRequest& req) {
    return population_moment(t, req, column_moments(t));
}

/// @name Requests for the moments used by the initialization
/// @{
inline MomentRequest with_alphas(int order, std::vector<SlotKind> head, const Vector& alpha,
                                 const Matrix& V) {
    while (static_cast<int>(head.size()) < order) head.push_back(SlotKind::Alpha);
    return {order, std::move(head), alpha, V};
}
/// P2 V = M_{j2}(I, V, alpha, ...)
inline MomentRequest p2_matvec_request(const Orders& o, const Vector& alpha, const Matrix& V) {
    return with_alphas(o.j2, {SlotKind::Identity, SlotKind::Basis}, alpha, V);
}
/// dense P2 = M_{j2}(I, I, alpha, ...)
inline MomentRequest p2_request(const Orders& o, const Vector& alpha) {
    return with_alphas(o.j2, {SlotKind::Identity, SlotKind::Identity}, alpha, Matrix());
}
/// R3 = M_{j3}(V, V, V, alpha, ...)
inline MomentRequest r3_request(const Orders& o, const Vector& alpha, const Matrix& V) {
    return with_alphas(o.j3, {SlotKind::Basis, SlotKind::Basis, SlotKind::Basis}, alpha, V);
}
/// Q1 = M_{l1}(I, alpha, ...)
inline MomentRequest q1_request(const Orders& o, const Vector& alpha) {
    return with_alphas(o.l1, {SlotKind::Identity}, alpha, Matrix());
}
/// Q2 = M_{l2}(V, V, alpha, ...)
inline MomentRequest q2_request(const Orders& o, const Vector& alpha, const Matrix& V) {
    return with_alphas(o.l2, {SlotKind::Basis, SlotKind::Basis}, alpha, V);
}
/// @}

/// P2 V in O(n k d) without any d x d intermediate.
inline Matrix implicit_P2_matvec(const SampleSet& S, const Orders& o, const Vector& alpha,
                                 const Matrix& V) {
    return score_contraction(S, p2_matvec_request(o, alpha, V)).matrix();
}

/// Which sample block a moment is estimated from.
enum class Stage {
    Subspace,  ///< P2 (first third)
    Tensor,    ///< R3 (second third)
    Magnitude, ///< Q1 (first half of the last third)
    Sign,      ///< Q2 (second half of the last third)
};

/// Source of contracted moments for the initialization pipeline.
class MomentOracle {
  public:
    virtual ~MomentOracle() = default;
    virtual Index dim() const = 0;
    virtual Moment moment(const MomentRequest& req, Stage stage) const = 0;
    /// Told the estimated subspace once the subspace stage is done.
    virtual void set_subspace(const Matrix&) const {}
};

/// How an EmpiricalMoments oracle uses its samples.
struct EstimatorOptions {
    /// true: disjoint blocks per stage (thirds, then halves of the last
    /// third); false: every stage uses all samples.
    bool partition = true;
    /**
     * Hermite control variates: before averaging y S_j(x), subtract from y its
     * least-squares fit on Hermite features of degrees other than j. Those
     * features are orthogonal to S_j in expectation, so the mean is unchanged
     * to O(features / n) while the variance drops. Degrees 0 and 1 in x are
     * used for the subspace stage; degrees 0 to 2 in r = V^T x for the later
     * stages once the subspace is known.
     */
    bool control_variates = false;
};

/// Estimates every moment from samples, per EstimatorOptions.
class EmpiricalMoments : public MomentOracle {
  public:
    explicit EmpiricalMoments(const SampleSet& S, EstimatorOptions opt = {}) : opt_(opt) {
        const Index n = S.n();
        if (n < 6) throw DimensionError("EmpiricalMoments: need at least 6 samples");
        if (!opt.partition) {
            for (auto& b : blocks_) b = S;
        } else {
            const Index third = n / 3;
            const Index rest = n - 2 * third;
            const Index half = rest / 2;
            blocks_[0] = S.slice(0, third);
            blocks_[1] = S.slice(third, third);
            blocks_[2] = S.slice(2 * third, half);
            blocks_[3] = S.slice(2 * third + half, rest - half);
        }
        if (opt_.control_variates) {
            // subspace block: remove the constant and linear parts of y once
            SampleSet& B = blocks_[0];
            if (B.n() > 2 * (B.d() + 1)) {
                Matrix F(B.n(), B.d() + 1);
                F.col(0).setOnes();
                F.rightCols(B.d()) = B.X.transpose();
                B.y = residual(F, B.y);
            }
        }
    }
    Index dim() const override { return blocks_[0].d(); }
    Moment moment(const MomentRequest& req, Stage stage) const override {
        const SampleSet& B = blocks_[static_cast<int>(stage)];
        if (!opt_.control_variates || stage == Stage::Subspace || V_.size() == 0)
            return score_contraction(B, req);
        SampleSet C = B;
        C.y = adjusted_labels(B, req.order);
        return score_contraction(C, req);
    }
    void set_subspace(const Matrix& V) const override { V_ = V; }
    const SampleSet& block(Stage s) const { return blocks_[static_cast<int>(s)]; }
    bool partitioned() const { return opt_.partition; }

  private:
    static Vector residual(const Matrix& F, const Vector& y) {
        return y - F * F.colPivHouseholderQr().solve(y);
    }

    /// y minus its fit on 1, r, and (r r^T - I) (upper triangle), skipping degree @p order.
    Vector adjusted_labels(const SampleSet& B, int order) const {
        const Index n = B.n(), k = V_.cols();
        const Matrix R = V_.transpose() * B.X; // k x n
        const Index p = 1 + (order != 1 ? k : 0) + (order != 2 ? k * (k + 1) / 2 : 0);
        if (n <= 2 * p) return B.y;
        Matrix F(n, p);
        Index c = 0;
        F.col(c++).setOnes();
        if (order != 1)
            for (Index i = 0; i < k; ++i) F.col(c++) = R.row(i).transpose();
        if (order != 2)
            for (Index i = 0; i < k; ++i)
                for (Index j = i; j < k; ++j) {
                    F.col(c) = R.row(i).cwiseProduct(R.row(j)).transpose();
                    if (i == j) F.col(c).array() -= 1.0;
                    ++c;
                }
        return residual(F, B.y);
    }

    EstimatorOptions opt_;
    SampleSet blocks_[4];
    mutable Matrix V_;
};

/// Exact moments of a teacher (no sampling error).
class PopulationMoments : public MomentOracle {
  public:
    explicit PopulationMoments(TeacherNetwork t) : t_(std::move(t)), m_(column_moments(t_)) {}
    Index dim() const override { return t_.d(); }
    Moment moment(const MomentRequest& req, Stage) const override {
        return population_moment(t_, req, m_);
    }

  private:
    TeacherNetwork t_;
    std::vector<std::array<double, 4>> m_;
};

} // namespace nnrecover

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace nnrecover {

/// Result of matching recovered columns to teacher columns.
struct MatchResult {
    double rel_err = std::numeric_limits<double>::infinity();
    std::vector<Index> permutation; ///< permutation[j] = recovered column matched to teacher column j
    bool v_matched = false;
};

namespace assign_detail {

inline bool augment(Index j, const std::vector<std::vector<char>>& ok, std::vector<char>& seen,
                    std::vector<Index>& owner) {
    const Index k = static_cast<Index>(ok.size());
    for (Index i = 0; i < k; ++i) {
        if (!ok[j][i] || seen[i]) continue;
        seen[i] = 1;
        if (owner[i] < 0 || augment(owner[i], ok, seen, owner)) {
            owner[i] = j;
            return true;
        }
    }
    return false;
}

/// Perfect matching in the bipartite graph ok[j][i]; empty if none.
inline std::vector<Index> perfect_matching(const std::vector<std::vector<char>>& ok) {
    const Index k = static_cast<Index>(ok.size());
    std::vector<Index> owner(static_cast<std::size_t>(k), -1);
    for (Index j = 0; j < k; ++j) {
        std::vector<char> seen(static_cast<std::size_t>(k), 0);
        if (!augment(j, ok, seen, owner)) return {};
    }
    std::vector<Index> perm(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) perm[owner[i]] = i;
    return perm;
}

} // namespace assign_detail

/// Min over permutations of max_j cost(j, perm[j]) by exhaustive search.
/// Infinite entries are forbidden pairs.
inline MatchResult bottleneck_bruteforce(const Matrix& cost) {
    const Index k = cost.rows();
    std::vector<Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), Index{0});
    MatchResult best;
    do {
        double worst = 0.0;
        for (Index j = 0; j < k; ++j) worst = std::max(worst, cost(j, perm[j]));
        if (worst < best.rel_err) {
            best.rel_err = worst;
            best.permutation = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Same optimum via binary search over the sorted costs with a bipartite
/// matching feasibility test; O(k^2 log k) matchings.
inline MatchResult bottleneck_matching(const Matrix& cost) {
    const Index k = cost.rows();
    std::vector<double> vals;
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < k; ++i)
            if (std::isfinite(cost(j, i))) vals.push_back(cost(j, i));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto feasible = [&](double thr) {
        std::vector<std::vector<char>> ok(static_cast<std::size_t>(k), std::vector<char>(static_cast<std::size_t>(k)));
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < k; ++i) ok[j][i] = cost(j, i) <= thr;
        return assign_detail::perfect_matching(ok);
    };
    MatchResult res;
    if (vals.empty() || feasible(vals.back()).empty()) return res;
    std::size_t lo = 0, hi = vals.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (!feasible(vals[mid]).empty()) hi = mid;
        else lo = mid + 1;
    }
    res.rel_err = vals[lo];
    res.permutation = feasible(vals[lo]);
    return res;
}

/**
 * @brief min over permutations pi of max_j |w*_j - w_pi(j)| / |w*_j|.
 *
 * Pairs with v_pi(j) != v*_j are excluded; when no such permutation exists
 * the unconstrained optimum is returned with v_matched = false. With
 * @p allow_flip each recovered column may also be negated (even activations).
 */
inline MatchResult recovery_error(const Matrix& W, const Vector& v, const Matrix& Wstar,
                                  const Vector& vstar, bool allow_flip = false) {
    const Index k = Wstar.cols();
    if (W.cols() != k || W.rows() != Wstar.rows() || v.size() != k || vstar.size() != k)
        throw DimensionError("recovery_error: shape mismatch");
    Matrix cost(k, k), constrained(k, k);
    for (Index j = 0; j < k; ++j) {
        const double nrm = Wstar.col(j).norm();
        for (Index i = 0; i < k; ++i) {
            double e = (Wstar.col(j) - W.col(i)).norm();
            if (allow_flip) e = std::min(e, (Wstar.col(j) + W.col(i)).norm());
            cost(j, i) = e / nrm;
            constrained(j, i) = v(i) == vstar(j) ? cost(j, i) : std::numeric_limits<double>::infinity();
        }
    }
    auto solve = [&](const Matrix& c) { return k <= 8 ? bottleneck_bruteforce(c) : bottleneck_matching(c); };
    MatchResult r = solve(constrained);
    if (!r.permutation.empty() && std::isfinite(r.rel_err)) {
        r.v_matched = true;
        return r;
    }
    r = solve(cost);
    r.v_matched = false;
    return r;
}

} // namespace nnrecover

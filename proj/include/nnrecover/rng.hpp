#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace nnrecover {

/**
 * @brief Stream derivation for reproducible random numbers.
 *
 * Every random quantity in the library is drawn from a std::mt19937_64
 * seeded with a 64-bit key. Keys are derived from a master seed by folding
 * tags through SplitMix64:
 *
 *     key = mix(mix(mix(master) ^ tag0) ^ tag1) ...
 *
 * String tags are hashed with FNV-1a first. Two streams with different tag
 * paths are statistically independent, and a stream can be replayed from
 * (master, tags) alone, which is what lets parallel trials run in any order.
 */
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
    std::uint64_t key = splitmix64(master);
    for (auto t : tags) key = splitmix64(key ^ t);
    return key;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return derive_seed(master, {fnv1a(tag)});
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::string_view tag) {
    return Engine(derive_seed(master, tag));
}

inline Eigen::MatrixXd gaussian_matrix(Engine& eng, Eigen::Index rows,
                                       Eigen::Index cols, double stddev = 1.0) {
    std::normal_distribution<double> nd(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(eng);
    return m;
}

inline Eigen::VectorXd unit_sphere(Engine& eng, Eigen::Index dim) {
    Eigen::VectorXd v = gaussian_matrix(eng, dim, 1);
    double nrm = v.norm();
    while (nrm == 0.0) {
        v = gaussian_matrix(eng, dim, 1);
        nrm = v.norm();
    }
    return v / nrm;
}

} // namespace nnrecover

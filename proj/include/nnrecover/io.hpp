#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "init.hpp"
#include "model.hpp"
#include "train.hpp"

namespace nnrecover {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j.at(i).size()) != cols) throw DimensionError("matrix_from_json: ragged rows");
        for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    }
    return m;
}

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

/// Keys: d, k, kappa, seed, W (row-major nested array), v, activation.
inline json teacher_to_json(const TeacherNetwork& t) {
    return {{"d", t.d()}, {"k", t.k()}, {"kappa", t.kappa}, {"seed", t.seed},
            {"W", matrix_to_json(t.W)}, {"v", vector_to_json(t.v)}, {"activation", t.act.name}};
}

inline TeacherNetwork teacher_from_json(const json& j) {
    TeacherNetwork t;
    t.W = matrix_from_json(j.at("W"));
    t.v = vector_from_json(j.at("v"));
    t.act = activation_by_name(j.at("activation").get<std::string>());
    t.kappa = j.value("kappa", 1.0);
    t.seed = j.value("seed", std::uint64_t{0});
    if (t.W.rows() != j.at("d").get<Index>() || t.W.cols() != j.at("k").get<Index>() || t.v.size() != t.W.cols())
        throw DimensionError("teacher_from_json: inconsistent shapes");
    for (Index i = 0; i < t.v.size(); ++i)
        if (t.v(i) != 1.0 && t.v(i) != -1.0) throw DimensionError("teacher_from_json: v must be +-1");
    return t;
}

inline TeacherNetwork load_teacher(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open teacher file '" + path + "'");
    return teacher_from_json(json::parse(in));
}

inline void save_teacher(const TeacherNetwork& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << teacher_to_json(t).dump(2) << '\n';
}

/// CSV with header x1,...,xd,y; one sample per row.
inline void write_samples_csv(const SampleSet& S, std::ostream& os) {
    for (Index i = 0; i < S.d(); ++i) os << 'x' << (i + 1) << ',';
    os << "y\n";
    os.precision(17);
    for (Index c = 0; c < S.n(); ++c) {
        for (Index i = 0; i < S.d(); ++i) os << S.X(i, c) << ',';
        os << S.y(c) << '\n';
    }
}

inline SampleSet read_samples_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error("read_samples_csv: empty input");
    const Index d = static_cast<Index>(std::count(line.begin(), line.end(), ','));
    std::vector<double> xs, ys;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Index col = 0;
        while (std::getline(ss, cell, ',')) {
            double v = std::stod(cell);
            if (col < d) xs.push_back(v);
            else ys.push_back(v);
            ++col;
        }
        if (col != d + 1) throw DimensionError("read_samples_csv: wrong column count");
    }
    SampleSet S;
    S.X = Eigen::Map<Matrix>(xs.data(), d, static_cast<Index>(ys.size()));
    S.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
    return S;
}

inline json init_result_to_json(const InitResult& r) {
    return {{"W0", matrix_to_json(r.W0)},
            {"v0", vector_to_json(r.v0)},
            {"s0", vector_to_json(r.s0)},
            {"zhat", vector_to_json(r.zhat)},
            {"rhat", vector_to_json(r.rhat)},
            {"orders",
             {{"j2", r.orders.j2}, {"j3", r.orders.j3}, {"l1", r.orders.l1}, {"l2", r.orders.l2},
              {"case", to_string(r.orders.kase)}}},
            {"diagnostics",
             {{"residual_z", r.residual_z},
              {"zero_residual_z", r.zero_residual_z},
              {"residual_r", r.residual_r},
              {"zero_residual_r", r.zero_residual_r},
              {"min_alpha_projection", r.min_alpha_projection},
              {"alpha_draws", r.alpha_draws},
              {"power_iterations", r.basis.iterations},
              {"power_k1", r.basis.k1},
              {"power_k2", r.basis.k2},
              {"cp_reconstruction_error", r.factors.diagnostics.reconstruction_error},
              {"cp_complex", r.factors.diagnostics.complex_flag}}}};
}

inline json recovery_report_to_json(const RecoveryReport& r) {
    json perm = json::array();
    for (Index p : r.permutation) perm.push_back(p);
    return {{"W", matrix_to_json(r.W)},
            {"v", vector_to_json(r.v)},
            {"v0", vector_to_json(r.v0)},
            {"final_rel_err", r.rel_err.empty() ? json(nullptr) : json(r.rel_err.back())},
            {"final_risk", r.risk.empty() ? json(nullptr) : json(r.risk.back())},
            {"permutation", perm},
            {"v_matched", r.v_matched},
            {"success", r.success},
            {"iterations", r.iterations},
            {"eta", r.eta},
            {"seconds", r.seconds},
            {"theory_regime", r.theory_regime}};
}

} // namespace nnrecover

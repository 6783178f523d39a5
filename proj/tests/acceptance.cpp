/// @brief Acceptance runner: prints one PASS/FAIL line per criterion 1-9.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "oracles.hpp"

using namespace nnrecover;
namespace fs = std::filesystem;

#ifndef NNRECOVER_SOURCE_DIR
#define NNRECOVER_SOURCE_DIR "."
#endif

namespace {

struct Verdict {
    bool passed = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            detail << "[failed] " << what << "; ";
        }
    }
    void note(const std::string& s) { detail << s << "; "; }
};

int failures = 0;

template <class F> void criterion(int id, const char* title, F&& body) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.passed = false;
        v.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.passed) ++failures;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", v.passed ? "PASS" : "FAIL", id, title, secs,
                v.detail.str().c_str());
    std::fflush(stdout);
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::path("acceptance_results") / name;
    fs::remove_all(p);
    return p;
}

struct WorkerScope {
    explicit WorkerScope(int w) { setenv("NNREC_WORKERS", std::to_string(w).c_str(), 1); }
    ~WorkerScope() { unsetenv("NNREC_WORKERS"); }
};

ExperimentConfig config(const std::string& file) {
    return load_config(std::string(NNRECOVER_SOURCE_DIR) + "/configs/" + file);
}

double rho_erf_closed(double s) {
    const double a = 4.0 * s * s + 1.0, b = 2.0 * s * s + 1.0;
    return std::min({std::pow(a, -0.5) - 1.0 / b, std::pow(a, -1.5) - std::pow(b, -3.0), std::pow(b, -2.0)});
}

std::vector<std::vector<SlotKind>> all_patterns(int j) {
    std::vector<std::vector<SlotKind>> out{{}};
    for (int s = 0; s < j; ++s) {
        std::vector<std::vector<SlotKind>> next;
        for (const auto& p : out)
            for (auto kind : {SlotKind::Identity, SlotKind::Alpha, SlotKind::Basis}) {
                auto q = p;
                q.push_back(kind);
                next.push_back(q);
            }
        out = std::move(next);
    }
    return out;
}

/// Random unit-column factors with condition number <= 10 and weights +-U(0.5, 2).
std::pair<Vector, Matrix> random_cp(Index k, std::uint64_t seed) {
    Engine eng = make_engine(seed, "acceptance-cp");
    Matrix U;
    double cond;
    do {
        U = gaussian_matrix(eng, k, k);
        for (Index i = 0; i < k; ++i) U.col(i).normalize();
        Vector sv = singular_values(U);
        cond = sv(0) / sv(k - 1);
    } while (cond > 10.0);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    std::bernoulli_distribution coin(0.5);
    Vector w(k);
    for (Index i = 0; i < k; ++i) w(i) = mag(eng) * (coin(eng) ? 1.0 : -1.0);
    return {w, U};
}

/// Frozen regression constant for the perturbation bound (measured worst case 16).
constexpr double kCpPerturbationConstant = 50.0;

} // namespace

int main() {
    criterion(1, "activation moment table", [](Verdict& v) {
        const double s3[] = {0.1, 1.0, 10.0};
        for (double s : s3) v.require(std::abs(rho(relu(), s) - 0.091) <= 1e-2, "relu at sigma " + num(s));
        v.require(std::abs(rho(leaky_relu(), 1.0) - 0.089) <= 1e-2, "leaky relu");
        v.require(std::abs(rho(squared_relu(), 1.0) - 0.27) <= 1e-2, "squared relu");
        const double sig[] = {1.8e-4, 4.9e-2, 5.1e-5};
        for (int i = 0; i < 3; ++i) {
            const double r = rho(sigmoid(), s3[i]);
            v.require(std::abs(r - sig[i]) <= 1e-2, "sigmoid at sigma " + num(s3[i]));
            v.note("sigmoid(" + num(s3[i]) + ")=" + num(r));
        }
        double worst = 0.0;
        for (double s : {0.1, 0.3, 1.0, 3.0, 10.0}) worst = std::max(worst, std::abs(rho(erf_act(), s) - rho_erf_closed(s)));
        v.require(worst <= 1e-8, "erf closed form");
        v.note("relu=" + num(rho(relu(), 1.0)) + " leaky=" + num(rho(leaky_relu(), 1.0)) +
               " squared=" + num(rho(squared_relu(), 1.0)) + " erf dev=" + num(worst));
    });

    criterion(2, "contracted moments vs dense", [](Verdict& v) {
        auto t = generate_teacher(4, 2, 2.0, 21);
        auto S = sample(t, 32, 22);
        Engine eng = make_engine(23, "acceptance");
        Vector alpha = unit_sphere(eng, 4);
        Matrix V = orthonormalize(gaussian_matrix(eng, 4, 2));
        double worst = 0.0;
        int count = 0;
        for (int j = 1; j <= 4; ++j)
            for (const auto& slots : all_patterns(j)) {
                MomentRequest req{j, slots, alpha, V};
                auto fast = score_contraction(S, req);
                auto slow = oracle::dense_moment(S, req);
                worst = std::max(worst, oracle::max_diff(fast.data, slow) / std::max(1e-300, oracle::max_abs(slow)));
                ++count;
            }
        v.require(worst <= 1e-12, "relative deviation " + num(worst));
        v.note(std::to_string(count) + " slot patterns, worst relative deviation " + num(worst));
    });

    criterion(3, "tensor decomposition", [](Verdict& v) {
        double exact = 0.0, noisy = 0.0;
        int cases = 0;
        for (Index k = 1; k <= 6; ++k)
            for (std::uint64_t s = 0; s < 10; ++s) {
                auto [w, U] = random_cp(k, 1000 * k + s);
                Tensor3 T = symmetric_rank_sum(w, U);
                exact = std::max(exact, oracle::aligned_factor_error(U, decompose_rank_k(T, k, 100, s).factors));
                Engine eng = make_engine(s, "acceptance-noise");
                Tensor3 N(k);
                for (auto& x : N.data()) x = std::normal_distribution<double>()(eng);
                N *= 1e-4 / N.frobenius_norm();
                T += N;
                noisy = std::max(noisy, oracle::aligned_factor_error(U, decompose_rank_k(T, k, 100, s).factors));
                ++cases;
            }
        v.require(exact <= 1e-6, "exact factor error " + num(exact));
        v.require(noisy <= kCpPerturbationConstant * 1e-4, "perturbed factor error " + num(noisy));
        v.note(std::to_string(cases) + " tensors, exact " + num(exact) + ", perturbed " + num(noisy) + " <= " +
               num(kCpPerturbationConstant) + " x 1e-4");
    });

    criterion(4, "population-moment pipeline", [](Verdict& v) {
        double worst_matched = 0.0;
        int vbad_matched = 0;
        Engine eng = make_engine(4, "acceptance-teachers");
        for (int i = 0; i < 20; ++i) {
            const Index k = std::uniform_int_distribution<Index>(1, 5)(eng);
            const Index d = std::uniform_int_distribution<Index>(k, 12)(eng);
            auto act = i % 2 ? relu() : squared_relu();
            auto t = generate_teacher(d, k, 2.0, 100 + i, act);
            InitConfig ic;
            ic.seed = static_cast<std::uint64_t>(i);
            auto r = initialize(PopulationMoments(t), k, act, ic);
            // Frobenius error column-for-column after the matching permutation
            auto m = recovery_error(r.W0, r.v0, t);
            Matrix P(d, k);
            Vector pv(k);
            for (Index j = 0; j < k; ++j) {
                P.col(j) = r.W0.col(m.permutation[j]);
                pv(j) = r.v0(m.permutation[j]);
            }
            worst_matched = std::max(worst_matched, (P - t.W).norm() / t.W.norm());
            vbad_matched += !m.v_matched || (pv - t.v).norm() != 0.0;
        }
        v.require(worst_matched <= 1e-5, "Frobenius error " + num(worst_matched));
        v.require(vbad_matched == 0, std::to_string(vbad_matched) + " teacher(s) with wrong v");
        v.note("20 teachers, worst |W0 - W*|_F / |W*|_F = " + num(worst_matched));
    });

    criterion(5, "desk-scale grids", [](Verdict& v) {
        auto rec = config("desk.json");
        rec.output_dir = fresh_dir("desk_recovery").string();
        auto a = run_recovery_grid(rec);
        for (const auto& c : a.checks) v.require(c.passed, "(a) " + c.name + ": " + c.detail);
        v.note("(a) " + std::to_string(a.checks.size()) + " check(s)" + (a.all_passed() ? " passed" : ""));

        auto ini = config("desk.json");
        ini.output_dir = fresh_dir("desk_init").string();
        auto b = run_init_error_grid(ini);
        for (const auto& c : b.checks) v.require(c.passed, "(b) " + c.name + ": " + c.detail);
        v.note("(b) " + std::to_string(b.checks.size()) + " check(s)" + (b.all_passed() ? " passed" : ""));

        // the comparison is a single trial; repeat it over five master seeds
        int ok_fast = 0, ok_r2 = 0, ok_ii = 0;
        std::string finals;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            auto conv = config("desk_convergence.json");
            conv.master_seed = s;
            conv.output_dir = fresh_dir("desk_convergence_seed" + std::to_string(s)).string();
            auto c = run_convergence_comparison(conv);
            for (const auto& ch : c.checks) {
                if (ch.name.find("fastest") != std::string::npos) ok_fast += ch.passed;
                else if (ch.name.find("does not reach") != std::string::npos) ok_ii += ch.passed;
                else if (ch.name.find("log-linear") != std::string::npos) ok_r2 += ch.passed;
            }
            finals += num(c.traces[1].objective.back()) + (s < 5 ? "," : "");
        }
        v.require(ok_fast == 5, "(c) approach I fastest to 1e-6 in " + std::to_string(ok_fast) + "/5 seeds");
        v.require(ok_r2 == 10, "(c) log-linear R^2 >= 0.95 in " + std::to_string(ok_r2) + "/10 runs");
        v.require(ok_ii == 5, "(c) approach II stays above 1e-2 in " + std::to_string(ok_ii) +
                                  "/5 seeds (final objectives " + finals + ")");
        v.note("(c) I fastest " + std::to_string(ok_fast) + "/5, R^2 " + std::to_string(ok_r2) + "/10, II stalls " +
               std::to_string(ok_ii) + "/5");
    });

    criterion(6, "local geometric convergence", [](Verdict& v) {
        int good = 0;
        std::string medians;
        for (std::uint64_t s = 1; s <= 10; ++s) {
            auto t = generate_teacher(10, 5, 2.0, s, squared_relu());
            auto S = sample(t, 10000, derive_seed(s, "samples"));
            InitConfig ic;
            ic.estimator.control_variates = true;
            ic.seed = s;
            bool ok = false;
            try {
                auto r = initialize(S, 5, t.act, ic);
                Matrix W = r.W0;
                const Vector& v0 = r.v0;
                std::vector<double> sq; // squared Frobenius error after matching, once rel_err < 0.1
                for (int q = 0; q < 20000; ++q) {
                    auto m = recovery_error(W, v0, t);
                    if (m.rel_err < 0.1 && m.v_matched) {
                        double e = 0.0;
                        for (Index j = 0; j < 5; ++j) e += (W.col(m.permutation[j]) - t.W.col(j)).squaredNorm();
                        sq.push_back(e);
                        if (m.rel_err < 1e-8) break; // stay clear of rounding noise
                    }
                    W -= 0.02 * empirical_gradient(W, v0, S, t.act);
                }
                if (sq.size() > 51) {
                    std::vector<double> ratios;
                    for (std::size_t i = sq.size() - 51; i + 1 < sq.size(); ++i) ratios.push_back(sq[i + 1] / sq[i]);
                    const bool all_below = std::all_of(ratios.begin(), ratios.end(), [](double x) { return x < 1.0; });
                    std::nth_element(ratios.begin(), ratios.begin() + 25, ratios.end());
                    const double med = ratios[25];
                    ok = all_below && med <= 0.99;
                    medians += num(med) + " ";
                }
            } catch (const Error& e) {
                medians += "error ";
            }
            good += ok;
        }
        v.require(good >= 9, std::to_string(good) + "/10 seeds geometric");
        v.note(std::to_string(good) + "/10 seeds with every ratio < 1 and median <= 0.99; medians " + medians);
    });

    criterion(7, "Hessian spectrum near the teacher", [](Verdict& v) {
        for (const char* name : {"squared_relu", "sigmoid", "relu"}) {
            auto t = generate_teacher(8, 3, 2.0, 1, activation_by_name(name));
            auto S = sample(t, 100000, 2);
            double prev = std::numeric_limits<double>::infinity(), prev_se = 0.0;
            std::string seq;
            for (double off : {0.0, 0.05, 0.2}) {
                auto m = neighborhood_lambda_min(t, S, off, 4, 3);
                const double se = bootstrap_lambda_min_se(t, m.W, S, 10, 4);
                if (off == 0.0) v.require(m.lambda_min > 0.0, std::string(name) + " lambda_min at W*");
                v.require(m.lambda_min <= prev + std::max(se, prev_se),
                          std::string(name) + " increase at offset " + num(off));
                seq += num(m.lambda_min) + (off < 0.2 ? "," : "");
                prev = m.lambda_min;
                prev_se = se;
            }
            v.note(std::string(name) + " lambda_min " + seq);
        }
        auto lin = generate_teacher(8, 3, 2.0, 1, linear());
        auto [lo, hi] = extreme_eigenvalues(empirical_hessian(lin.W, lin.v, sample(lin, 100000, 2), lin.act));
        v.require(std::abs(lo) <= 1e-3 * hi, "linear control lambda_min " + num(lo));
        v.note("linear lambda_min/lambda_max " + num(lo / hi));
    });

    criterion(8, "gradient correctness", [](Verdict& v) {
        double worst = 0.0;
        bool exact_zero = true;
        for (const auto& name : activation_names()) {
            auto act = activation_by_name(name);
            if (act.smoothness != Smoothness::Smooth) continue;
            auto t = generate_teacher(5, 3, 2.0, 5, act);
            auto S = sample(t, 200, 6);
            for (std::uint64_t p = 0; p < 20; ++p) {
                Matrix W = t.W + random_weights(5, 3, 100 + p);
                Matrix g = empirical_gradient(W, t.v, S, act);
                Matrix fd = oracle::fd_gradient([&](const Matrix& M) { return empirical_risk(M, t.v, S, act); }, W, 1e-5);
                worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff());
            }
            exact_zero = exact_zero && empirical_gradient(t.W, t.v, S, act).cwiseAbs().maxCoeff() == 0.0;
        }
        v.require(worst <= 1e-5, "finite-difference deviation " + num(worst));
        v.require(exact_zero, "gradient at the teacher is not exactly zero");
        v.note("worst relative deviation " + num(worst) + ", exact zero at teacher");
    });

    criterion(9, "determinism across worker counts", [](Verdict& v) {
        auto base = config("desk.json");
        base.d_values = {6, 8};
        base.n_values = {2000, 4000};
        base.k = 3;
        base.trials = 3;
        base.iters = 300;
        base.thresholds = json::object();
        std::string first_rec, first_init;
        for (int w : {1, 3}) {
            WorkerScope scope(w);
            auto c = base;
            c.output_dir = fresh_dir("determinism_w" + std::to_string(w)).string();
            run_recovery_grid(c);
            run_init_error_grid(c);
            const std::string rec = slurp(fs::path(c.output_dir) / "recovery.csv") +
                                    slurp(fs::path(c.output_dir) / "recovery_rate.csv");
            const std::string ini = slurp(fs::path(c.output_dir) / "init.csv") +
                                    slurp(fs::path(c.output_dir) / "init_error.csv");
            if (first_rec.empty()) {
                first_rec = rec;
                first_init = ini;
            } else {
                v.require(rec == first_rec, "recovery CSVs differ between 1 and 3 workers");
                v.require(ini == first_init, "init CSVs differ between 1 and 3 workers");
            }
        }
        v.note("recovery and init CSVs byte-identical with 1 and 3 workers");
    });

    std::printf("%d criterion/criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

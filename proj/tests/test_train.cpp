#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace nnrecover;

namespace {
SampleSet one_sample(double x, double y) {
    SampleSet S{Matrix::Constant(1, 1, x), Vector::Constant(1, y)};
    return S;
}

/// Partitioned moments with Hermite control variates, then GD with eta = 0.02.
RecoveryReport desk_run(Index d, std::uint64_t seed) {
    auto t = generate_teacher(d, 5, 2.0, seed, squared_relu());
    auto S = sample(t, 10000, derive_seed(seed, "samples"));
    InitConfig ic;
    ic.estimator.control_variates = true;
    ic.seed = seed;
    auto r = initialize(S, 5, t.act, ic);
    GdConfig g;
    g.eta = 0.02;
    g.T = 1000;
    g.record_trace = false;
    return learn(S, t.act, r.W0, r.v0, g, &t);
}
} // namespace

TEST(Risk, HandCase) {
    // relu, w = 1, v = 2, x = 2: prediction 4, label 1, residual 3
    auto S = one_sample(2.0, 1.0);
    Matrix W = Matrix::Constant(1, 1, 1.0);
    Vector v = Vector::Constant(1, 2.0);
    EXPECT_DOUBLE_EQ(empirical_risk(W, v, S, relu()), 4.5);
    // d/dw = v phi'(wx) x * residual = 2 * 1 * 2 * 3
    EXPECT_DOUBLE_EQ(empirical_gradient(W, v, S, relu())(0, 0), 12.0);
    // d/dv = phi(wx) * residual = 2 * 3
    EXPECT_DOUBLE_EQ(empirical_gradient_v(W, v, S, relu())(0), 6.0);
}

TEST(Risk, ZeroAtTeacher) {
    auto t = generate_teacher(6, 3, 2.0, 1, squared_relu());
    auto S = sample(t, 500, 2);
    EXPECT_LE(empirical_risk(t.W, t.v, S, t.act), 1e-28);
    EXPECT_LE(empirical_gradient(t.W, t.v, S, t.act).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE(empirical_gradient_v(t.W, t.v, S, t.act).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Risk, GradientMatchesFiniteDifferences) {
    for (const char* name : {"squared_relu", "sigmoid", "tanh", "erf"}) {
        auto act = activation_by_name(name);
        auto t = generate_teacher(4, 2, 2.0, 3, act);
        auto S = sample(t, 100, 4);
        for (std::uint64_t p = 0; p < 20; ++p) {
            Matrix W = t.W + random_weights(4, 2, p);
            Vector v = t.v + 0.3 * random_output_weights(2, p);
            Matrix g = empirical_gradient(W, v, S, act);
            Matrix fd = oracle::fd_gradient([&](const Matrix& M) { return empirical_risk(M, v, S, act); }, W, 1e-5);
            EXPECT_LE((g - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, g.cwiseAbs().maxCoeff())) << name;
            Matrix gv = empirical_gradient_v(W, v, S, act);
            Matrix fdv = oracle::fd_gradient(
                [&](const Matrix& u) { return empirical_risk(W, Vector(u.col(0)), S, act); }, Matrix(v), 1e-5);
            EXPECT_LE((gv - fdv).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, gv.cwiseAbs().maxCoeff())) << name;
        }
    }
}

TEST(RecoveryError, PermutationAndSignHandling) {
    auto t = generate_teacher(6, 4, 2.0, 5);
    Matrix W = t.W;
    Vector v = t.v;
    // reversing the column order is invisible to the metric
    Matrix Wr = W.rowwise().reverse();
    Vector vr = v.reverse();
    auto m = recovery_error(Wr, vr, t);
    EXPECT_TRUE(m.v_matched);
    EXPECT_LE(m.rel_err, 1e-15);
    // a wrong sign on one unit cannot be matched
    Vector vbad = v;
    vbad(0) = -vbad(0);
    auto bad = recovery_error(W, vbad, t);
    EXPECT_FALSE(bad.v_matched);
    // a single perturbed column sets the max
    Matrix Wp = W;
    Wp.col(2) += 0.1 * W.col(2).norm() * Vector::Unit(6, 0);
    EXPECT_NEAR(recovery_error(Wp, v, t).rel_err, 0.1, 1e-12);
    EXPECT_THROW(recovery_error(W.leftCols(3), v, t), DimensionError);
}

TEST(RecoveryError, FlipAllowedOnlyForEvenActivations) {
    auto t = generate_teacher(5, 2, 2.0, 6, quadratic());
    EXPECT_LE(recovery_error(-t.W, t.v, t).rel_err, 1e-15);
    auto u = generate_teacher(5, 1, 1.0, 6, relu()); // one unit: no other column to match
    EXPECT_NEAR(recovery_error(-u.W, u.v, u).rel_err, 2.0, 1e-12);
}

TEST(Bottleneck, HungarianStyleMatchesBruteForce) {
    Engine eng = make_engine(7, "x");
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const Index k = 1 + rep % 7;
        Matrix c(k, k);
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j) c(i, j) = U(eng);
        const double want = oracle::brute_bottleneck(c);
        EXPECT_DOUBLE_EQ(bottleneck_matching(c).rel_err, want);
        EXPECT_DOUBLE_EQ(bottleneck_bruteforce(c).rel_err, want);
    }
}

TEST(Learn, StaysAtTeacher) {
    auto t = generate_teacher(6, 3, 2.0, 8, squared_relu());
    auto S = sample(t, 400, 9);
    GdConfig g;
    g.T = 20;
    g.tol = 0.0;
    auto r = learn(S, t.act, t.W, t.v, g, &t);
    EXPECT_LE(r.rel_err.back(), 1e-12);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.rel_err.size(), 21u);
    EXPECT_EQ((r.v - t.v).norm(), 0.0);
}

TEST(Learn, StopsAtTolerance) {
    auto t = generate_teacher(6, 3, 2.0, 8, squared_relu());
    auto S = sample(t, 400, 9);
    GdConfig g;
    g.T = 50;
    auto r = learn(S, t.act, t.W, t.v, g, &t);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_TRUE(r.success);
}

TEST(Learn, DivergenceGuard) {
    auto t = generate_teacher(6, 3, 2.0, 10, squared_relu());
    auto S = sample(t, 400, 11);
    GdConfig g;
    g.eta = 50.0;
    g.T = 100;
    EXPECT_THROW(learn(S, t.act, t.W + random_weights(6, 3, 1), t.v, g, &t), DivergenceError);
}

TEST(Learn, RejectsBadConfigurations) {
    auto t = generate_teacher(6, 3, 2.0, 10, squared_relu());
    auto S = sample(t, 50, 11);
    GdConfig g;
    g.T = 0;
    EXPECT_THROW(learn(S, t.act, t.W, t.v, g), DimensionError);
    g.T = 100;
    g.resample = true;
    EXPECT_THROW(learn(S, t.act, t.W, t.v, g), DimensionError);
    g.resample = false;
    g.eta = -1.0;
    EXPECT_THROW(learn(S, t.act, t.W, t.v, g), DimensionError);
}

TEST(Learn, DefaultStepFromStartingPoint) {
    Matrix W0 = Matrix::Zero(3, 2);
    W0(0, 0) = 2.0;
    W0(1, 1) = 1.0;
    Vector v0(2);
    v0 << 1.0, -3.0;
    // 1 / (k v_max^2 sigma_1^{2p}) = 1 / (2 * 9 * 4)
    EXPECT_DOUBLE_EQ(default_step(W0, v0, 1.0), 1.0 / 72.0);
}

TEST(Learn, TrainedOutputWeightsMove) {
    auto t = generate_teacher(5, 2, 2.0, 12, squared_relu());
    auto S = sample(t, 300, 13);
    GdConfig g;
    g.eta = 0.01;
    g.T = 5;
    g.tol = 0.0;
    g.train_v = true;
    Vector v0 = random_output_weights(2, 1);
    auto r = learn(S, t.act, random_weights(5, 2, 1), v0, g, &t);
    EXPECT_GT((r.v - v0).norm(), 0.0);
    EXPECT_EQ((r.v0 - v0).norm(), 0.0);
}

TEST(Learn, LocalLinearConvergence) {
    auto t = generate_teacher(8, 3, 2.0, 14, squared_relu());
    auto S = sample(t, 5000, 15);
    Matrix W0 = t.W + 0.1 * random_weights(8, 3, 2);
    GdConfig g;
    g.eta = 0.05;
    g.T = 400;
    g.tol = 0.0;
    auto r = learn(S, t.act, W0, t.v, g, &t);
    EXPECT_LE(r.rel_err.back(), 1e-6);
    // successive 100-step contraction factors agree to within a factor 3
    std::vector<double> ratios;
    for (int q = 100; q <= 300; q += 100) ratios.push_back(r.rel_err[q + 100] / r.rel_err[q]);
    for (double x : ratios) EXPECT_LT(x, 0.5);
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    EXPECT_LE(*hi, 3.0 * *lo);
}

TEST(Learn, ResamplingUsesFreshBlocks) {
    auto t = generate_teacher(6, 3, 2.0, 16, squared_relu());
    auto S = sample(t, 20000, 17);
    GdConfig g;
    g.eta = 0.05;
    g.T = 100;
    g.tol = 0.0;
    g.resample = true;
    auto r = learn(S, t.act, t.W + 0.1 * random_weights(6, 3, 3), t.v, g, &t);
    EXPECT_LT(r.rel_err.back(), r.rel_err.front());
}

TEST(Learn, DeskPresetRecoversAtDimensionTen) {
    int ok = 0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        try {
            ok += desk_run(10, s).success;
        } catch (const Error&) {
        }
    }
    EXPECT_GE(ok, 9);
}

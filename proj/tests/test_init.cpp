#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace nnrecover;

namespace {
MatVec dense_operator(const Matrix& P) {
    return [P](const Matrix& V) -> Matrix { return P * V; };
}

Matrix diag_operator(std::initializer_list<double> entries) {
    Vector d(static_cast<Index>(entries.size()));
    Index i = 0;
    for (double e : entries) d(i++) = e;
    return d.asDiagonal();
}

InitConfig desk_init_config(std::uint64_t seed) {
    InitConfig c;
    c.estimator.control_variates = true;
    c.seed = seed;
    return c;
}
} // namespace

TEST(PowerMethod, DiagonalPositive) {
    Matrix P = diag_operator({2.0, 1.0, 0.1, 0.0});
    auto b = power_method(dense_operator(P), 4, 2);
    EXPECT_LE(subspace_distance(b.V, Matrix::Identity(4, 2)), 1e-6);
    EXPECT_LE((b.V.transpose() * b.V - Matrix::Identity(2, 2)).norm(), 1e-12);
    EXPECT_EQ(b.k1, 2);
    EXPECT_EQ(b.k2, 0);
}

TEST(PowerMethod, IndefiniteSplitsAcrossBranches) {
    Matrix P = diag_operator({3.0, -2.0, 0.5, 0.0});
    auto b = power_method(dense_operator(P), 4, 2);
    EXPECT_EQ(b.k1, 1);
    EXPECT_EQ(b.k2, 1);
    EXPECT_LE(subspace_distance(b.V, Matrix::Identity(4, 2)), 1e-6);
}

TEST(PowerMethod, FullRankIndefiniteWithKEqualD) {
    // both branches span the whole space; picks must still be distinct
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PowerMethodConfig pc;
        pc.seed = seed;
        auto b = power_method(dense_operator(diag_operator({3.0, -2.0, 0.5})), 3, 3, pc);
        EXPECT_EQ(b.k1 + b.k2, 3);
        EXPECT_LE((b.V.transpose() * b.V - Matrix::Identity(3, 3)).norm(), 1e-10);
    }
}

TEST(PowerMethod, RotatedIndefiniteOperator) {
    Engine eng = make_engine(3, "x");
    Matrix Q = orthonormalize(gaussian_matrix(eng, 8, 8));
    Vector ev(8);
    ev << 2.0, -1.5, 1.0, -0.8, 0.05, -0.03, 0.01, 0.0;
    Matrix P = Q * ev.asDiagonal() * Q.transpose();
    auto b = power_method(dense_operator(P), 8, 4);
    EXPECT_LE(subspace_distance(b.V, Q.leftCols(4)), 1e-6);
}

TEST(PowerMethod, PerturbationSlope) {
    Matrix P = diag_operator({2.0, -1.0, 0.0, 0.0, 0.0});
    Engine eng = make_engine(5, "noise");
    Matrix E = gaussian_matrix(eng, 5, 5);
    E = 0.5 * (E + E.transpose());
    E /= spectral_norm(E);
    // the top-2 eigengap is 1, so the subspace moves by at most ~ eps / gap
    for (double eps : {1e-4, 1e-3, 1e-2}) {
        auto b = power_method(dense_operator(P + eps * E), 5, 2);
        EXPECT_LE(subspace_distance(b.V, Matrix::Identity(5, 2)), 2.0 * eps) << eps;
    }
}

TEST(PowerMethod, RejectsDegenerateInputs) {
    EXPECT_THROW(power_method(dense_operator(Matrix::Zero(3, 3)), 3, 1), DegenerateSpectrumError);
    EXPECT_THROW(power_method(dense_operator(diag_operator({1.0, 0.0, 0.0})), 3, 2), DegenerateSpectrumError);
    EXPECT_THROW(power_method(dense_operator(Matrix::Identity(3, 3)), 3, 4), DimensionError);
}

class PopulationPipeline : public ::testing::TestWithParam<const char*> {};

TEST_P(PopulationPipeline, RecoversTeacherExactly) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto t = generate_teacher(10, 5, 2.0, seed, activation_by_name(GetParam()));
        PopulationMoments pm(t);
        InitConfig cfg;
        cfg.seed = seed;
        auto r = initialize(pm, 5, t.act, cfg);
        auto m = recovery_error(r.W0, r.v0, t);
        EXPECT_TRUE(m.v_matched) << seed;
        EXPECT_LE(m.rel_err, 1e-5) << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(Homogeneous, PopulationPipeline, ::testing::Values("relu", "squared_relu", "leaky_relu"));

TEST(Initialize, SingleNeuronNorm) {
    TeacherNetwork t;
    t.W = Matrix::Zero(4, 1);
    t.W(0, 0) = 2.0;
    t.v = Vector::Ones(1);
    t.act = squared_relu();
    PopulationMoments pm(t);
    auto r = initialize(pm, 1, t.act);
    EXPECT_NEAR(r.W0.col(0).norm(), 2.0, 1e-8);
    EXPECT_NEAR(r.W0(0, 0), 2.0, 1e-8);
    EXPECT_EQ(r.v0(0), 1.0);
}

TEST(Initialize, RejectsIneligibleActivations) {
    auto t = generate_teacher(5, 2, 2.0, 1, linear());
    auto S = sample(t, 200, 2);
    EXPECT_THROW(initialize(S, 2, linear()), EligibilityError);
    // non-homogeneous activations are outside the magnitude recovery
    EXPECT_THROW(initialize(S, 2, sigmoid()), EligibilityError);
}

TEST(Initialize, DiagnosticsAreConsistent) {
    auto t = generate_teacher(10, 5, 2.0, 4, squared_relu());
    PopulationMoments pm(t);
    auto r = initialize(pm, 5, t.act);
    EXPECT_EQ(r.orders.j2, 2);
    EXPECT_EQ(r.orders.j3, 3);
    EXPECT_GE(r.alpha_draws, 1);
    EXPECT_NEAR(r.alpha.norm(), 1.0, 1e-12);
    EXPECT_GE(r.min_alpha_projection, 0.05 / std::sqrt(5.0));
    EXPECT_LE(r.residual_z, r.zero_residual_z);
    EXPECT_LE(r.residual_r, r.zero_residual_r);
    EXPECT_LE(r.residual_z, 1e-5 * std::max(1.0, r.zero_residual_z));
    EXPECT_LE((r.basis.V.transpose() * r.basis.V - Matrix::Identity(5, 5)).norm(), 1e-10);
    EXPECT_LE(subspace_distance(r.basis.V, orthonormalize(t.W)), 1e-5);
    EXPECT_LE(r.factors.diagnostics.reconstruction_error, 1e-8);
    for (Index i = 0; i < 5; ++i) EXPECT_TRUE(r.s0(i) == 1.0 || r.s0(i) == -1.0);
}

TEST(Initialize, SameSeedIsDeterministic) {
    auto t = generate_teacher(8, 3, 2.0, 6, squared_relu());
    auto S = sample(t, 3000, 7);
    auto a = initialize(S, 3, t.act, desk_init_config(9)), b = initialize(S, 3, t.act, desk_init_config(9));
    EXPECT_EQ((a.W0 - b.W0).norm(), 0.0);
    EXPECT_EQ((a.v0 - b.v0).norm(), 0.0);
}

TEST(Initialize, FiniteSampleSignsMostlyCorrect) {
    int correct = 0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto t = generate_teacher(10, 5, 2.0, 100 + s, squared_relu());
        auto S = sample(t, 10000, 200 + s);
        auto r = initialize(S, 5, t.act, desk_init_config(s));
        auto m = recovery_error(r.W0, r.v0, t);
        correct += m.v_matched;
        worst = std::max(worst, m.rel_err);
    }
    EXPECT_GE(correct, 9);
    EXPECT_LT(worst, 1.0);
}

TEST(Initialize, RecoveredSignFlipsWithTeacher) {
    // negating v* negates every moment, so the recovered v must flip too
    auto t = generate_teacher(8, 3, 2.0, 8, squared_relu());
    auto u = t;
    u.v = -t.v;
    auto a = initialize(PopulationMoments(t), 3, t.act), b = initialize(PopulationMoments(u), 3, u.act);
    auto ma = recovery_error(a.W0, a.v0, t), mb = recovery_error(b.W0, b.v0, u);
    EXPECT_TRUE(ma.v_matched);
    EXPECT_TRUE(mb.v_matched);
    EXPECT_LE(ma.rel_err, 1e-5);
    EXPECT_LE(mb.rel_err, 1e-5);
}

TEST(RecMagSign, RejectsShapeMismatch) {
    auto t = generate_teacher(5, 2, 2.0, 1, squared_relu());
    PopulationMoments pm(t);
    Orders o;
    EXPECT_THROW(rec_mag_sign(orthonormalize(t.W), Matrix::Identity(3, 3), pm, o, homogeneous_constants(t.act), 1.0,
                              Vector::Ones(5).normalized(), 0.0),
                 DimensionError);
}

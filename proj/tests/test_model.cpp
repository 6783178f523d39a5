#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace nnrecover;

TEST(GenerateTeacher, PaperSingularValues) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto t = generate_teacher(10, 5, 2.0, seed);
        Vector s = singular_values(t.W);
        const double want[] = {2.0, 1.75, 1.5, 1.25, 1.0};
        for (int i = 0; i < 5; ++i) EXPECT_NEAR(s(i), want[i], 1e-12);
        for (Index i = 0; i < 5; ++i) EXPECT_TRUE(t.v(i) == 1.0 || t.v(i) == -1.0);
    }
}

TEST(GenerateTeacher, SingleUnitColumn) {
    auto t = generate_teacher(3, 1, 1.0, 7);
    EXPECT_EQ(t.W.cols(), 1);
    EXPECT_NEAR(t.W.col(0).norm(), 1.0, 1e-14);
}

TEST(GenerateTeacher, IndependentJacobiSvd) {
    auto t = generate_teacher(4, 2, 3.0, 11);
    // brute-force one-sided Jacobi on W^T W eigenvalues
    Matrix G = t.W.transpose() * t.W;
    double a = G(0, 0), b = G(1, 1), c = G(0, 1);
    double mid = 0.5 * (a + b), rad = std::sqrt(0.25 * (a - b) * (a - b) + c * c);
    EXPECT_NEAR(std::sqrt(mid + rad), 3.0, 1e-10);
    EXPECT_NEAR(std::sqrt(mid - rad), 1.0, 1e-10);
}

TEST(GenerateTeacher, RejectsBadDimensions) {
    EXPECT_THROW(generate_teacher(3, 4, 2.0, 1), DimensionError);
    EXPECT_THROW(generate_teacher(3, 0, 2.0, 1), DimensionError);
    EXPECT_THROW(generate_teacher(3, 2, 0.5, 1), DimensionError);
}

TEST(GenerateTeacher, SeedReproducible) {
    auto a = generate_teacher(8, 3, 2.0, 42), b = generate_teacher(8, 3, 2.0, 42);
    EXPECT_EQ((a.W - b.W).norm(), 0.0);
    EXPECT_EQ((a.v - b.v).norm(), 0.0);
    auto c = generate_teacher(8, 3, 2.0, 43);
    EXPECT_GT((a.W - c.W).norm(), 0.0);
    auto sa = sample(a, 50, 9), sb = sample(b, 50, 9);
    EXPECT_EQ((sa.X - sb.X).norm(), 0.0);
    EXPECT_EQ((sa.y - sb.y).norm(), 0.0);
}

namespace {
TeacherNetwork e1_teacher(Index d, double v, const ActivationSpec& act) {
    TeacherNetwork t;
    t.W = Matrix::Zero(d, 1);
    t.W(0, 0) = 1.0;
    t.v = Vector::Constant(1, v);
    t.act = act;
    return t;
}
} // namespace

TEST(Sample, HandCases) {
    Vector x = Vector::Zero(3);
    x(0) = 2.0;
    auto t = e1_teacher(3, 1.0, relu());
    EXPECT_DOUBLE_EQ(forward(t.W, t.v, t.act, x)(0), 2.0);
    x(0) = -3.0;
    auto u = e1_teacher(3, -1.0, squared_relu());
    EXPECT_DOUBLE_EQ(forward(u.W, u.v, u.act, x)(0), 0.0);
}

TEST(Sample, TwoTermHandSum) {
    Matrix W(2, 2);
    W << 1.0, 0.5, -1.0, 2.0;
    Vector v(2);
    v << 1.0, -1.0;
    Vector x(2);
    x << 0.3, -0.4;
    // w1.x = 0.7 -> 0.49; w2.x = 0.15 - 0.8 = -0.65 -> 0
    EXPECT_NEAR(forward(W, v, squared_relu(), x)(0), 0.49, 1e-15);
}

TEST(Sample, NoiselessLabels) {
    auto t = generate_teacher(6, 3, 2.0, 5);
    auto S = sample(t, 200, 6);
    EXPECT_EQ(S.n(), 200);
    for (Index i = 0; i < S.n(); ++i) {
        double y = 0.0;
        for (Index j = 0; j < 3; ++j) y += t.v(j) * t.act.phi(t.W.col(j).dot(S.X.col(i)));
        EXPECT_NEAR(S.y(i), y, 1e-12 * std::max(1.0, std::abs(y)));
    }
    EXPECT_THROW(sample(t, 0, 1), DimensionError);
}

TEST(ConditionNumbers, PaperSetting) {
    auto t = generate_teacher(10, 5, 2.0, 3);
    auto c = condition_numbers(t);
    EXPECT_NEAR(c.kappa, 2.0, 1e-12);
    EXPECT_NEAR(c.lambda, 6.5625, 1e-10);
    EXPECT_EQ(c.nu, 1.0);
    const double want[] = {2.0, 1.75, 1.5, 1.25, 1.0};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(c.sigma(i), want[i], 1e-9);
}

TEST(ConditionNumbers, Orthonormal) {
    Matrix W = Matrix::Identity(5, 3);
    auto c = condition_numbers(W, Vector::Ones(3));
    EXPECT_NEAR(c.kappa, 1.0, 1e-14);
    EXPECT_NEAR(c.lambda, 1.0, 1e-14);
}

TEST(ConditionNumbers, RankDeficient) {
    Matrix W = Matrix::Zero(4, 2);
    W(0, 0) = 1.0;
    W(0, 1) = 1.0;
    EXPECT_THROW(condition_numbers(W, Vector::Ones(2)), ConditioningError);
}

TEST(Persistence, TeacherJsonRoundTrip) {
    auto t = generate_teacher(5, 2, 1.5, 8, relu());
    auto j = teacher_to_json(t);
    for (const char* key : {"d", "k", "kappa", "seed", "W", "v", "activation"}) EXPECT_TRUE(j.contains(key)) << key;
    auto u = teacher_from_json(json::parse(j.dump()));
    EXPECT_EQ((u.W - t.W).norm(), 0.0);
    EXPECT_EQ((u.v - t.v).norm(), 0.0);
    EXPECT_EQ(u.act.name, "relu");
}

TEST(Persistence, SamplesCsvRoundTrip) {
    auto t = generate_teacher(3, 2, 1.5, 8);
    auto S = sample(t, 20, 1);
    std::stringstream ss;
    write_samples_csv(S, ss);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    EXPECT_EQ(header, "x1,x2,x3,y");
    auto R = read_samples_csv(ss);
    EXPECT_EQ(R.n(), 20);
    EXPECT_EQ((R.X - S.X).norm(), 0.0);
    EXPECT_EQ((R.y - S.y).norm(), 0.0);
}

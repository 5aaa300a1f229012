#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hjbrb/certify.hpp"

using namespace hjbrb;
using namespace hjbrb::oracle;

namespace {

AffineSystem toy_system(double rate = 0.05) {
    ModelSpec m;
    m.domain_lo = -1.0;
    m.domain_hi = 1.0;
    m.rate = rate;
    return assemble(m, build_grid(m, 1.0, 0.5));
}

SparseMatrix sparse_diag(const Vector& d) {
    SparseMatrix A(d.size(), d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) A.insert(i, i) = d[i];
    A.makeCompressed();
    return A;
}

double spectral_norm(const Matrix& A) { return Eigen::JacobiSVD<Matrix>(A).singularValues()[0]; }

}  // namespace

TEST(Lipschitz, HigherOrderConstantsVanish) {
    const LipschitzConstants L = lipschitz_constants(desk_system());
    EXPECT_EQ(L.rho_L2, 0.0);
    EXPECT_EQ(L.rho_f2, 0.0);
    EXPECT_DOUBLE_EQ(L.rho, L.rho_L0 + 2.0 * L.rho_L1 + L.rho_f1);
}

TEST(Lipschitz, UndiscountedCost) {
    EXPECT_DOUBLE_EQ(lipschitz_constants(toy_system(0.0)).rho_f1, 1.0);
    EXPECT_DOUBLE_EQ(lipschitz_constants(toy_system()).rho_f1, std::exp(-0.05 * 0.5));
}

TEST(Lipschitz, MatchesDenseSvdOracleOnToyGrid) {
    const AffineSystem sys = toy_system();
    ASSERT_EQ(sys.size(), 6u);
    const LipschitzConstants L = lipschitz_constants(sys);
    const Matrix D(sys.Dx);
    // sup over unit gamma of ||diag(gamma) Dx||: coordinate directions and random search
    double best = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) {
        Vector e = Vector::Zero(6);
        e[i] = 1.0;
        best = std::max(best, spectral_norm(e.asDiagonal() * D));
    }
    std::mt19937_64 rng(1);
    for (int k = 0; k < 2000; ++k) {
        const Vector g = random_vector(6, rng).normalized();
        EXPECT_LE(spectral_norm(g.asDiagonal() * D), L.rho_L0 * (1 + 1e-12));
    }
    EXPECT_NEAR(L.rho_L0, best, 1e-10);
    // the (u, gamma) pairing: sup over unit u of ||diag(Dx u)|| = max |Dx u|_i
    double best_u = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) best_u = std::max(best_u, D.row(i).norm());
    EXPECT_NEAR(L.rho_L1, best_u, 1e-10);
}

TEST(Lipschitz, RandomPairInequality) {
    const AffineSystem sys = desk_system();
    const LipschitzConstants L = lipschitz_constants(sys);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> mu(0.0, 100.0), scale(0.01, 10.0);
    int violations = 0;
    for (int k = 0; k < 100; ++k) {
        const double m = mu(rng);
        const TruthState a = random_state(sys, rng, scale(rng)), b = random_state(sys, rng, scale(rng));
        const Matrix diff = Matrix(eval_DG(m, a, sys).assembled()) - Matrix(eval_DG(m, b, sys).assembled());
        const double lhs = Eigen::BDCSVD<Matrix>(diff).singularValues()[0];
        if (lhs > L.rho * (a.stacked() - b.stacked()).norm()) ++violations;
    }
    EXPECT_EQ(violations, 0);
}

TEST(ExactBeta, SyntheticMatrices) {
    SparseMatrix I(8, 8);
    I.setIdentity();
    EXPECT_NEAR(exact_beta(I).beta, 1.0, 1e-12);
    Vector d = Vector::Ones(8);
    d[0] = 2.0;
    d[1] = 0.5;
    EXPECT_NEAR(exact_beta(sparse_diag(d)).beta, 0.5, 1e-12);
    d[3] = 0.0;
    const BetaResult s = exact_beta(sparse_diag(d));
    EXPECT_TRUE(s.singular);
    EXPECT_EQ(s.beta, 0.0);
}

TEST(ExactBeta, MatchesDenseSvdAtTruthPoint) {
    const AffineSystem sys = desk_system();
    const HowardResult r = howard_solve(50.0, sys);
    const double ref = dense_min_singular(dense_jacobian(50.0, r.state, sys));
    const BetaResult b = exact_beta(50.0, r.state, sys);
    EXPECT_FALSE(b.singular);
    EXPECT_NEAR(b.beta, ref, 1e-8);
    EXPECT_NEAR(exact_beta(eval_DG(50.0, r.state, sys).assembled()).beta, ref, 1e-8);
}

TEST(ExactBeta, MatchesDenseSvdAwayFromSolution) {
    const AffineSystem sys = desk_system();
    std::mt19937_64 rng(3);
    const HowardResult r = howard_solve(10.0, sys);
    const TruthState x = TruthState::from_stacked(r.state.stacked() + 0.1 * random_state(sys, rng).stacked());
    EXPECT_NEAR(exact_beta(10.0, x, sys).beta, dense_min_singular(dense_jacobian(10.0, x, sys)), 1e-8);
}

TEST(Indicator, Examples) {
    Indicator a = indicator_and_bound(2.0, 1.0, 0.0);
    EXPECT_EQ(a.tau_ub, 0.0);
    ASSERT_TRUE(a.delta);
    EXPECT_EQ(*a.delta, 0.0);

    // tau = 1: beta^2 = 2 rho res
    a = indicator_and_bound(2.0, 1.0, 0.25);
    EXPECT_DOUBLE_EQ(a.tau_ub, 1.0);
    ASSERT_TRUE(a.delta);
    EXPECT_DOUBLE_EQ(*a.delta, 0.5);

    a = indicator_and_bound(2.0, 1.0, 0.1);
    EXPECT_NEAR(a.tau_ub, 0.4, 1e-15);
    ASSERT_TRUE(a.delta);
    EXPECT_NEAR(*a.delta, 0.5 * (1.0 - std::sqrt(0.6)), 1e-15);
    EXPECT_NEAR(*a.delta, 0.112702, 1e-6);

    a = indicator_and_bound(2.0, 1.0, 0.3);
    EXPECT_GT(a.tau_ub, 1.0);
    EXPECT_FALSE(a.delta);

    const Certificate c = make_certificate(5.0, 2.0, 1.0, 0.3);
    EXPECT_FALSE(c.rigorous);
    EXPECT_FALSE(c.delta);
    EXPECT_EQ(c.mu, 5.0);
}

TEST(Indicator, DeltaMonotone) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int k = 0; k < 200; ++k) {
        const double rho = 1.0 + 3.0 * u(rng), beta = u(rng);
        const double res = 0.4 * u(rng) * beta * beta / (2.0 * rho);
        const double base = *indicator_and_bound(rho, beta, res).delta;
        EXPECT_GE(*indicator_and_bound(rho, beta, 1.1 * res).delta, base);
        EXPECT_LE(*indicator_and_bound(rho, 1.1 * beta, res).delta, base);
    }
}

TEST(Brr, TwoByTwoQuadraticSystem) {
    // G(x) = (x0^2 + x1 - 3, x0 - x1 + 1), root (1, 2); DG is 2-Lipschitz
    auto G = [](const Vector& x) { return Vector((Vector(2) << x[0] * x[0] + x[1] - 3.0, x[0] - x[1] + 1.0).finished()); };
    auto DG = [](const Vector& x) { return Matrix((Matrix(2, 2) << 2.0 * x[0], 1.0, 1.0, -1.0).finished()); };
    const Vector root = (Vector(2) << 1.0, 2.0).finished();
    const Vector xbar = (Vector(2) << 1.03, 1.96).finished();
    const Matrix J = DG(xbar);
    const double beta = dense_min_singular(J);
    const Indicator ind = indicator_and_bound(2.0, beta, G(xbar).norm());
    ASSERT_TRUE(ind.delta);
    EXPECT_LE((xbar - root).norm(), *ind.delta);
    const Eigen::FullPivLU<Matrix> lu(J);
    const BrrReport rep = brr_iterate(G, [&](const Vector& y) { return Vector(lu.solve(y)); }, xbar, 40, *ind.delta);
    EXPECT_TRUE(rep.contracting);
    EXPECT_TRUE(rep.in_ball);
    EXPECT_LE((rep.final_point - root).norm(), 1e-12);
}

TEST(Brr, StationaryAtTruthSolution) {
    const AffineSystem sys = desk_system();
    const double mu = 35.0;
    const HowardResult r = howard_solve(mu, sys);
    const BrrReport rep = brr_selfcheck(mu, r.state, sys, 10);
    EXPECT_TRUE(rep.in_ball);
    EXPECT_LE((rep.final_point - r.state.stacked()).norm(), 1e-9);
    EXPECT_LE(rep.steps.front(), 1e-9);
}

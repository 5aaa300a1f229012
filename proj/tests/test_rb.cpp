#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rb_fixture.hpp"
#include "hjbrb/rb.hpp"

using namespace hjbrb;
using namespace hjbrb::oracle;

namespace {

GreedyOptions desk_options() {
    GreedyOptions o;
    o.train = equispaced(0.0, 100.0, 33);
    o.anchor_train = equispaced(0.0, 100.0, 17);
    o.eps_tol = 1e-4;
    return o;
}

class GreedyDesk : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        sys_ = std::make_unique<AffineSystem>(desk_system());
        off_ = std::make_unique<OfflineData>(greedy_offline(*sys_, desk_options()));
    }
    static void TearDownTestSuite() {
        off_.reset();
        sys_.reset();
    }
    static std::unique_ptr<AffineSystem> sys_;
    static std::unique_ptr<OfflineData> off_;
};
std::unique_ptr<AffineSystem> GreedyDesk::sys_;
std::unique_ptr<OfflineData> GreedyDesk::off_;

}  // namespace

TEST(ReducedBasis, OrthonormalAfterEveryExtension) {
    const AffineSystem sys = desk_system();
    ReducedBasis b(sys);
    for (double mu : {50.0, 0.0, 100.0, 25.0, 75.0, 12.5, 87.5}) {
        ASSERT_TRUE(b.add_snapshot(mu, howard_solve(mu, sys).state));
        const auto N = static_cast<Eigen::Index>(b.size());
        Matrix G(N, N);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j)
                G(i, j) = b.vectors()[static_cast<std::size_t>(i)].dot(b.vectors()[static_cast<std::size_t>(j)]);
        EXPECT_LE((G - Matrix::Identity(N, N)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ReducedBasis, DuplicateSnapshotSkipped) {
    const AffineSystem sys = desk_system();
    ReducedBasis b(sys);
    const TruthState s = howard_solve(40.0, sys).state;
    ASSERT_TRUE(b.add_snapshot(40.0, s));
    EXPECT_FALSE(b.add_snapshot(40.0, s));
    TruthState scaled = s;
    scaled.u *= 3.0;
    scaled.gamma *= 3.0;
    EXPECT_FALSE(b.add_snapshot(41.0, scaled));
    EXPECT_EQ(b.size(), 1u);
}

TEST(ReducedBasis, SnapshotReproduction) {
    const DeskBasis d({50.0, 0.0, 100.0, 30.0});
    const HowardOptions truth;
    for (std::size_t s = 0; s < d.snapshots.size(); ++s) {
        const double mu = d.basis.model().snapshot_mu[s];
        const ReducedSolution r = online_solve(mu, d.basis.model());
        EXPECT_LE(r.residual, 10.0 * truth.tol) << "mu=" << mu;
        EXPECT_LE((d.basis.lift(r.coeffs).stacked() - d.snapshots[s].stacked()).norm(), 1e-8);
    }
}

TEST(ReducedBasis, OnlineResidualMatchesDirectEvaluation) {
    const DeskBasis d({50.0, 0.0, 100.0, 20.0, 80.0});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> mu(0.0, 100.0);
    for (int k = 0; k < 20; ++k) {
        const double m = mu(rng);
        const Vector c = random_vector(static_cast<Eigen::Index>(d.basis.size()), rng, 50.0);
        const double online = online_residual_norm(m, c, d.basis.model());
        const double direct = y_norm(eval_G(m, d.basis.lift(c), d.sys));
        EXPECT_LE(std::abs(online - direct), 1e-10 * direct) << "k=" << k;
    }
}

TEST(ReducedBasis, ZeroCoefficientsGiveDataResidual) {
    const DeskBasis d({50.0, 10.0});
    EXPECT_NEAR(online_residual_norm(30.0, Vector::Zero(2), d.basis.model()), d.sys.rhs0.norm(),
                1e-12 * d.sys.rhs0.norm());
}

TEST(ReducedBasis, SingleLinearDirectionLeastSquares) {
    // a snapshot with vanishing control makes G affine in the coefficient
    const AffineSystem sys = desk_system();
    ReducedBasis b(sys);
    TruthState s = howard_solve(60.0, sys).state;
    s.gamma.setZero();
    ASSERT_TRUE(b.add_snapshot(60.0, s));
    const double mu = 35.0;
    const auto n = static_cast<Eigen::Index>(sys.size());
    const TruthState xi = TruthState::from_stacked(b.vectors()[0]);
    Vector a(2 * n), g0(2 * n);
    a << -(sys.Dx * xi.u), sys.B * xi.u + mu * (sys.Dx * xi.u);
    g0 << Vector::Zero(n), -sys.rhs0;
    const double c_ref = -a.dot(g0) / a.squaredNorm();
    const ReducedSolution r = online_solve(mu, b.model());
    EXPECT_NEAR(r.coeffs[0], c_ref, 1e-9 * std::abs(c_ref));
}

TEST(ReducedBasis, CostDependsOnBasisSizeOnly) {
    const DeskBasis d({50.0, 0.0});
    EXPECT_EQ(d.basis.model().R.rows(), static_cast<Eigen::Index>(affine_columns(2)));
    EXPECT_EQ(affine_columns(0), 1u);
    EXPECT_EQ(affine_columns(1), 4u);
    EXPECT_EQ(affine_columns(3), 13u);
}

TEST(Greedy, HugeToleranceStopsOnceAllCertified) {
    const AffineSystem sys = desk_system();
    GreedyOptions o = desk_options();
    o.eps_tol = 1e9;
    const OfflineData off = greedy_offline(sys, o);
    EXPECT_EQ(off.status, GreedyStatus::converged);
    EXPECT_GE(off.N(), off.stage1_N);
    ASSERT_FALSE(off.history.empty());
    const GreedyRecord& last = off.history.back();
    EXPECT_EQ(last.stage, 2);
    EXPECT_TRUE(std::isfinite(last.max_delta));
    EXPECT_EQ(std::count_if(off.history.begin(), off.history.end(), [](const GreedyRecord& h) {
                  return h.stage == 2 && std::isfinite(h.max_delta);
              }), 1);
    for (const GreedyRecord& h : off.history)
        if (h.stage == 1 && h.N == off.stage1_N) EXPECT_LT(h.max_tau, 1.0);
}

TEST(Greedy, SingleTrainingPoint) {
    const AffineSystem sys = desk_system();
    GreedyOptions o;
    o.train = {37.0};
    o.anchor_train = {37.0};
    const OfflineData off = greedy_offline(sys, o);
    EXPECT_EQ(off.N(), 1u);
    EXPECT_EQ(off.status, GreedyStatus::converged);
    const Certificate c = certificate(37.0, off);
    ASSERT_TRUE(c.delta);
    EXPECT_LE(*c.delta, 1e-8);
}

TEST(Greedy, ExhaustionReportsDiagnostic) {
    const AffineSystem sys = desk_system();
    GreedyOptions o = desk_options();
    o.max_basis = 2;
    const OfflineData off = greedy_offline(sys, o);
    EXPECT_EQ(off.status, GreedyStatus::exhausted);
    EXPECT_NE(off.diagnostic.find("worst mu"), std::string::npos);
    EXPECT_LE(off.N(), 2u);
}

TEST_F(GreedyDesk, StageTwoMonotoneAndConverged) {
    EXPECT_EQ(off_->status, GreedyStatus::converged) << off_->diagnostic;
    double prev = std::numeric_limits<double>::infinity();
    for (const GreedyRecord& h : off_->history) {
        if (h.stage != 2) continue;
        EXPECT_LE(h.max_delta, prev + 1e-12) << "N=" << h.N;
        prev = h.max_delta;
    }
    EXPECT_LE(prev, desk_options().eps_tol);
}

TEST_F(GreedyDesk, CertificatesBoundTheTrueError) {
    int violations = 0, certified = 0;
    for (double mu : equispaced(0.0, 100.0, 41)) {
        const CertifiedSolution cs = certify_online(mu, off_->reduced, off_->anchors, off_->scm, off_->lipschitz.rho);
        const Certificate& c = cs.certificate;
        EXPECT_EQ(c.delta.has_value(), c.tau_ub <= 1.0);
        if (!c.delta) continue;
        ++certified;
        const double err = (off_->lift(cs.solution).stacked() - howard_solve(mu, *sys_).state.stacked()).norm();
        if (err > *c.delta) ++violations;
    }
    EXPECT_EQ(violations, 0);
    EXPECT_EQ(certified, 41);
}

TEST_F(GreedyDesk, SnapshotCertificatesVanish) {
    for (double mu : off_->reduced.snapshot_mu) {
        const Certificate c = certificate(mu, *off_);
        ASSERT_TRUE(c.delta);
        EXPECT_LE(*c.delta, 1e-7);
        EXPECT_LE(c.residual, 1e-7);
    }
}

TEST_F(GreedyDesk, TinyBasisIsNotCertified) {
    const Certificate c = certificate(13.0, *off_, 1);
    EXPECT_GT(c.tau_ub, 1.0);
    EXPECT_FALSE(c.delta);
    EXPECT_FALSE(c.rigorous);
}

TEST_F(GreedyDesk, BrrIterationFromReducedSolution) {
    // first certified parameter with tau_ub <= 0.5 away from the snapshots
    for (double mu : equispaced(3.0, 97.0, 15)) {
        const CertifiedSolution cs = certify_online(mu, off_->reduced, off_->anchors, off_->scm, off_->lipschitz.rho,
                                                    std::min<std::size_t>(off_->N(), off_->stage1_N));
        if (!cs.certificate.delta || cs.certificate.tau_ub > 0.5 || cs.certificate.tau_ub < 1e-6) continue;
        const TruthState xbar = off_->lift(cs.solution);
        const TruthState truth = howard_solve(mu, *sys_).state;
        const BrrReport rep = brr_selfcheck(mu, xbar, *sys_, 20);
        for (double r : rep.ratios) EXPECT_LT(r, 1.0);
        EXPECT_TRUE(rep.in_ball);
        EXPECT_LE((rep.final_point - truth.stacked()).norm(), 1e-8);
        EXPECT_LE((xbar.stacked() - truth.stacked()).norm(), *cs.certificate.delta);
        return;
    }
    GTEST_SKIP() << "no parameter with 1e-6 < tau_ub <= 0.5";
}

#pragma once

// Online inf-sup lower bound by the successive constraint method.
//
// With Jbar = DG at the anchor point and J = DG(mu)(x_N(mu)),
//   beta_N(mu) >= beta(Jbar) * (1 + inf_y <(J - Jbar) Jbar^{-1} y, y> / |y|^2).
// J - Jbar = sum_a w_a(mu) P_a is affine in the reduced coefficients; the
// infimum is bounded below by an LP over z_a = Rayleigh quotients of
// sym(P_a Jbar^{-1}) using a bounding box and exact values at sample points.
//
// Weight layout for N basis vectors (size 3N + 3):
//   [0, N)        theta_1 pieces, weight c_n - cbar_n        P: (g, u) -> (0, -(Dx xi^u_n) g - xi^g_n Dx u)
//   [N, 2N)       theta_2 pieces, weight mu c_n - mubar cbar_n   (zero operator: u' is linear)
//   2N            theta_f constant part, weight 0
//   2N + 1, 2N+2  constant operator parts, weights 0 and mu - mubar   P: (g, u) -> (0, Dx u)
//   [2N+3, 3N+3)  cost pieces, weight c_n - cbar_n               P: (g, u) -> (0, -d xi^g_n g)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <limits>
#include <string>
#include <vector>

#include "hjbrb/certify.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/lanczos.hpp"
#include "hjbrb/linalg/simplex.hpp"
#include "hjbrb/model.hpp"
#include "hjbrb/reduced.hpp"
#include "hjbrb/system.hpp"

namespace hjbrb {

struct AnchorPoint {
    double mu = 0.0;
    double beta_offline = 0.0;
    Vector coeffs;  ///< reduced coefficients of the linearization point
};

struct AnchorSet {
    std::vector<AnchorPoint> anchors;
    [[nodiscard]] std::size_t R() const noexcept { return anchors.size(); }
};

struct ScmConstraint {
    double mu = 0.0;
    Vector coeffs;
    double value = 0.0;  ///< lower bound of inf_y over the sym. operator at (mu, coeffs)
};

using Interval = std::array<double, 2>;

struct AnchorScm {
    std::vector<Interval> box_gamma;  ///< theta_1 pieces per basis vector
    std::vector<Interval> box_cost;   ///< cost pieces per basis vector
    Interval box_drift{0.0, 0.0};     ///< constant part with weight mu - mubar
    std::vector<ScmConstraint> constraints;
};

struct ScmData {
    std::vector<AnchorScm> per_anchor;
    int constraint_count = 8;
};

struct ScmOptions {
    double threshold = 0.5;
    int constraint_count = 8;
    double eig_tol = 1e-6;  // Ritz residuals are added to the bounds
    int eig_max_iter = 300;
    BetaOptions beta{};
};

[[nodiscard]] inline std::size_t scm_weight_count(std::size_t n_basis) noexcept { return 3 * n_basis + 3; }

namespace detail {
inline Vector padded(const Vector& v, Eigen::Index n) {
    Vector out = Vector::Zero(n);
    out.head(std::min(n, v.size())) = v.head(std::min(n, v.size()));
    return out;
}
}  // namespace detail

/// Affine weights of J(mu) - J(mubar); shorter coefficient vectors are zero padded.
[[nodiscard]] inline Vector theta_coefficients(double mu, double mu_bar, const Vector& c, const Vector& c_bar) {
    const Eigen::Index N = std::max(c.size(), c_bar.size());
    const Vector a = detail::padded(c, N), b = detail::padded(c_bar, N);
    const AffineTheta t = affine_theta(mu), tb = affine_theta(mu_bar);
    Vector w = Vector::Zero(static_cast<Eigen::Index>(scm_weight_count(static_cast<std::size_t>(N))));
    for (Eigen::Index n = 0; n < N; ++n) {
        w[n] = t.L[0] * a[n] - tb.L[0] * b[n];
        w[N + n] = t.L[1] * a[n] - tb.L[1] * b[n];
        w[2 * N + 3 + n] = t.f[0] * a[n] - tb.f[0] * b[n];
    }
    w[2 * N] = t.f[0] - tb.f[0];
    w[2 * N + 1] = t.L[0] - tb.L[0];
    w[2 * N + 2] = t.L[1] - tb.L[1];
    return w;
}

[[nodiscard]] inline std::size_t nearest_anchor(double mu, const AnchorSet& set) {
    if (set.anchors.empty()) throw StateError("nearest_anchor: empty anchor set");
    std::size_t best = 0;
    for (std::size_t r = 1; r < set.anchors.size(); ++r) {
        const double d = std::abs(set.anchors[r].mu - mu), db = std::abs(set.anchors[best].mu - mu);
        if (d < db || (d == db && set.anchors[r].mu < set.anchors[best].mu)) best = r;
    }
    return best;
}

namespace detail {

/// Nonzero-operator coordinates of the weight vector, in LP variable order:
/// gamma pieces, drift part, cost pieces.
inline Vector active_weights(const Vector& w, Eigen::Index N) {
    Vector a(2 * N + 1);
    a.head(N) = w.head(N);
    a[N] = w[2 * N + 2];
    a.tail(N) = w.segment(2 * N + 3, N);
    return a;
}

}  // namespace detail

/// 1 + LP lower bound of inf_z sum_a w_a z_a over the stored superset.
[[nodiscard]] inline double beta_online_lb(double mu, const Vector& coeffs, std::size_t anchor,
                                           const AnchorSet& set, const ScmData& scm) {
    if (anchor >= set.anchors.size() || anchor >= scm.per_anchor.size())
        throw StateError("beta_online_lb: anchor index out of range");
    const AnchorPoint& A = set.anchors[anchor];
    const AnchorScm& S = scm.per_anchor[anchor];
    const auto N = static_cast<Eigen::Index>(S.box_gamma.size());
    if (coeffs.size() > N || A.coeffs.size() > N)
        throw StateError("beta_online_lb: SCM data covers fewer basis vectors than the query");
    const Vector w = detail::active_weights(theta_coefficients(mu, A.mu, detail::padded(coeffs, N), A.coeffs), N);
    if (w.cwiseAbs().maxCoeff() == 0.0) return 1.0;

    const Eigen::Index m = 2 * N + 1;
    Vector lo(m), hi(m);
    for (Eigen::Index n = 0; n < N; ++n) {
        lo[n] = S.box_gamma[static_cast<std::size_t>(n)][0];
        hi[n] = S.box_gamma[static_cast<std::size_t>(n)][1];
        lo[N + 1 + n] = S.box_cost[static_cast<std::size_t>(n)][0];
        hi[N + 1 + n] = S.box_cost[static_cast<std::size_t>(n)][1];
    }
    lo[N] = S.box_drift[0];
    hi[N] = S.box_drift[1];

    std::vector<std::size_t> order(S.constraints.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = std::abs(S.constraints[a].mu - mu), db = std::abs(S.constraints[b].mu - mu);
        if (da != db) return da < db;
        return S.constraints[a].mu < S.constraints[b].mu;
    });
    const std::size_t M = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(scm.constraint_count, 0)));
    Matrix Acon(static_cast<Eigen::Index>(M), m);
    Vector bcon(static_cast<Eigen::Index>(M));
    for (std::size_t k = 0; k < M; ++k) {
        const ScmConstraint& c = S.constraints[order[k]];
        Acon.row(static_cast<Eigen::Index>(k)) =
            detail::active_weights(theta_coefficients(c.mu, A.mu, detail::padded(c.coeffs, N), A.coeffs), N)
                .transpose();
        bcon[static_cast<Eigen::Index>(k)] = c.value;
    }
    const linalg::LpResult lp = linalg::solve_box_lp(w, lo, hi, Acon, bcon);
    if (lp.status != linalg::LpStatus::optimal)
        throw NumericalError("beta_online_lb: SCM linear program infeasible at mu = " + std::to_string(mu));
    return 1.0 + lp.value;
}

[[nodiscard]] inline double beta_lb(double mu, const Vector& coeffs, const AnchorSet& set, const ScmData& scm) {
    const std::size_t r = nearest_anchor(mu, set);
    return set.anchors[r].beta_offline * beta_online_lb(mu, coeffs, r, set, scm);
}

/// Offline (truth-dimensional) SCM operations for one anchor linearization.
class AnchorOperator {
public:
    AnchorOperator(const AnchorPoint& anchor, const ReducedBasis& basis, const ScmOptions& opt)
        : basis_(&basis), opt_(opt), mu_bar_(anchor.mu),
          xbar_(basis.lift(anchor.coeffs)),
          solver_(anchor.mu, xbar_, basis.system()) {
        if (solver_.singular()) throw NumericalError("SCM: singular Jacobian at anchor " + std::to_string(anchor.mu));
    }

    /// [lambda_min, lambda_max] of sym(P Jbar^{-1}) for P applied via apply/apply_t.
    template <class Apply, class ApplyT>
    [[nodiscard]] Interval spectrum(Apply&& apply, ApplyT&& apply_t) const {
        const auto op = [&](const Vector& y) {
            return Vector(0.5 * (apply(solver_.solve(y)) + solver_.solve_transpose(apply_t(y))));
        };
        linalg::LanczosOptions lo;
        lo.tol = opt_.eig_tol;
        lo.max_iter = opt_.eig_max_iter;
        const auto r = linalg::lanczos_extremes(op, static_cast<Eigen::Index>(2 * n()), lo);
        const double scale = std::max(std::abs(r.lambda_min), std::abs(r.lambda_max));
        const double pad = 1e-9 * scale;
        return {r.lambda_min - r.residual_min - pad, r.lambda_max + r.residual_max + pad};
    }

    [[nodiscard]] Interval gamma_piece(std::size_t k) const {
        const Vector& xi = basis_->vectors()[k];
        const auto N = static_cast<Eigen::Index>(n());
        const Vector a = basis_->system().Dx * xi.tail(N);  // Dx xi^u
        const Vector b = xi.head(N);                         // xi^g
        const SparseMatrix& Dx = basis_->system().Dx;
        return spectrum(
            [&](const Vector& x) {
                Vector y = Vector::Zero(2 * N);
                y.tail(N) = -a.cwiseProduct(x.head(N)) - b.cwiseProduct(Dx * x.tail(N));
                return y;
            },
            [&](const Vector& y) {
                Vector x(2 * N);
                x.head(N) = -a.cwiseProduct(y.tail(N));
                x.tail(N) = -(Dx.transpose() * b.cwiseProduct(y.tail(N)));
                return x;
            });
    }

    [[nodiscard]] Interval cost_piece(std::size_t k) const {
        const Vector& xi = basis_->vectors()[k];
        const auto N = static_cast<Eigen::Index>(n());
        const Vector a = basis_->system().discount.cwiseProduct(xi.head(N));
        return spectrum(
            [&](const Vector& x) {
                Vector y = Vector::Zero(2 * N);
                y.tail(N) = -a.cwiseProduct(x.head(N));
                return y;
            },
            [&](const Vector& y) {
                Vector x = Vector::Zero(2 * N);
                x.head(N) = -a.cwiseProduct(y.tail(N));
                return x;
            });
    }

    [[nodiscard]] Interval drift_piece() const {
        const auto N = static_cast<Eigen::Index>(n());
        const SparseMatrix& Dx = basis_->system().Dx;
        return spectrum(
            [&](const Vector& x) {
                Vector y = Vector::Zero(2 * N);
                y.tail(N) = Dx * x.tail(N);
                return y;
            },
            [&](const Vector& y) {
                Vector x = Vector::Zero(2 * N);
                x.tail(N) = Dx.transpose() * y.tail(N);
                return x;
            });
    }

    /// Lower bound of lambda_min(sym((J(mu, x) - Jbar) Jbar^{-1})).
    [[nodiscard]] double online_infimum(double mu, const TruthState& x) const {
        const AffineSystem& s = basis_->system();
        const auto N = static_cast<Eigen::Index>(n());
        const Vector dg1 = (-(s.Dx * x.u) - x.gamma.cwiseProduct(s.discount)) -
                           (-(s.Dx * xbar_.u) - xbar_.gamma.cwiseProduct(s.discount));
        const Vector dw = Vector::Constant(N, mu - mu_bar_) - (x.gamma - xbar_.gamma);
        const auto apply = [&](const Vector& v) {
            Vector y = Vector::Zero(2 * N);
            y.tail(N) = dg1.cwiseProduct(v.head(N)) + dw.cwiseProduct(s.Dx * v.tail(N));
            return y;
        };
        const auto apply_t = [&](const Vector& y) {
            Vector v(2 * N);
            v.head(N) = dg1.cwiseProduct(y.tail(N));
            v.tail(N) = s.Dx.transpose() * dw.cwiseProduct(y.tail(N));
            return v;
        };
        const auto op = [&](const Vector& y) {
            return Vector(0.5 * (apply(solver_.solve(y)) + solver_.solve_transpose(apply_t(y))));
        };
        linalg::LanczosOptions lo;
        lo.tol = opt_.eig_tol;
        lo.max_iter = opt_.eig_max_iter;
        lo.want_max = false;
        const auto r = linalg::lanczos_extremes(op, 2 * N, lo);
        const double scale = std::max(std::abs(r.lambda_min), std::abs(r.lambda_max));
        return r.lambda_min - r.residual_min - 1e-9 * scale;
    }

private:
    [[nodiscard]] std::size_t n() const { return basis_->system().size(); }

    const ReducedBasis* basis_;
    ScmOptions opt_;
    double mu_bar_;
    TruthState xbar_;
    JacobianSolver solver_;
};

struct AnchorSelection {
    AnchorSet anchors;
    ScmData scm;
    std::vector<double> train;
    std::vector<std::vector<double>> history;  ///< beta_lb over train after each anchor addition
};

namespace detail {

inline AnchorScm build_anchor_boxes(const AnchorOperator& op, std::size_t n_basis) {
    AnchorScm s;
    for (std::size_t k = 0; k < n_basis; ++k) {
        s.box_gamma.push_back(op.gamma_piece(k));
        s.box_cost.push_back(op.cost_piece(k));
    }
    s.box_drift = op.drift_piece();
    return s;
}

}  // namespace detail

/// SCM constructor anchored on a reduced basis; keeps the truth-sized
/// operators needed to extend the data when the basis grows.
class ScmBuilder {
public:
    ScmBuilder(const ReducedBasis& basis, std::vector<double> train, ScmOptions opt)
        : basis_(&basis), opt_(opt) {
        sel_.train = std::move(train);
        sel_.scm.constraint_count = opt.constraint_count;
        if (sel_.train.empty()) throw ConfigError("select_anchors: empty anchor training sample");
    }

    [[nodiscard]] const AnchorSelection& selection() const noexcept { return sel_; }
    [[nodiscard]] AnchorSelection& selection() noexcept { return sel_; }

    /// Algorithm: start from the midpoint of the parameter range and add the
    /// minimizer of the online factor until it exceeds the threshold everywhere.
    void select(std::function<void(const std::string&)> log = {}) {
        sel_.anchors.anchors.clear();
        sel_.scm.per_anchor.clear();
        sel_.history.clear();
        ops_.clear();
        refresh_coefficients();
        const ModelSpec& m = basis_->system().model;
        add_anchor(0.5 * (m.mu_lo + m.mu_hi));
        while (true) {
            assign_constraints();
            std::vector<double> lb(sel_.train.size()), factor(sel_.train.size());
            std::size_t worst = 0;
            for (std::size_t i = 0; i < sel_.train.size(); ++i) {
                const std::size_t r = nearest_anchor(sel_.train[i], sel_.anchors);
                factor[i] = beta_online_lb(sel_.train[i], coeffs_[i], r, sel_.anchors, sel_.scm);
                lb[i] = sel_.anchors.anchors[r].beta_offline * factor[i];
                if (factor[i] < factor[worst]) worst = i;
            }
            sel_.history.push_back(lb);
            if (log)
                log("anchors R=" + std::to_string(sel_.anchors.R()) + " min online factor " +
                    std::to_string(factor[worst]) + " at mu=" + std::to_string(sel_.train[worst]));
            if (factor[worst] > opt_.threshold) return;
            if (sel_.anchors.R() >= sel_.train.size())
                throw NumericalError("select_anchors: anchor count exceeds the training sample; the online bound "
                                     "cannot be certified (worst mu = " + std::to_string(sel_.train[worst]) + ")");
            for (const AnchorPoint& a : sel_.anchors.anchors)
                if (a.mu == sel_.train[worst])
                    throw NumericalError("select_anchors: worst parameter is already an anchor (mu = " +
                                         std::to_string(a.mu) + ")");
            add_anchor(sel_.train[worst]);
        }
    }

    /// Extend every anchor's data to the current basis size and refresh the
    /// constraint samples with the current reduced coefficients.
    void extend() {
        const std::size_t N = basis_->size();
        for (std::size_t r = 0; r < ops_.size(); ++r) {
            AnchorScm& s = sel_.scm.per_anchor[r];
            for (std::size_t k = s.box_gamma.size(); k < N; ++k) {
                s.box_gamma.push_back(ops_[r]->gamma_piece(k));
                s.box_cost.push_back(ops_[r]->cost_piece(k));
            }
            s.constraints.clear();
        }
        refresh_coefficients();
        assign_constraints();
    }

    /// Online factor computed exactly (truth-dimensional), for verification.
    [[nodiscard]] double exact_online_factor(double mu, const Vector& coeffs) const {
        const std::size_t r = nearest_anchor(mu, sel_.anchors);
        return 1.0 + ops_[r]->online_infimum(mu, basis_->lift(coeffs));
    }

    /// Truth-dimensional operator of anchor r.
    [[nodiscard]] const AnchorOperator& anchor_operator(std::size_t r) const { return *ops_.at(r); }

private:
    void refresh_coefficients() {
        coeffs_.clear();
        for (double mu : sel_.train) coeffs_.push_back(basis_->model().solve(mu).coeffs);
    }

    void add_anchor(double mu) {
        AnchorPoint a;
        a.mu = mu;
        a.coeffs = basis_->model().solve(mu).coeffs;
        const BetaResult b = exact_beta(mu, basis_->lift(a.coeffs), basis_->system(), opt_.beta);
        if (b.singular || !(b.beta > 0.0))
            throw NumericalError("select_anchors: singular Jacobian at anchor mu = " + std::to_string(mu));
        a.beta_offline = b.beta;
        sel_.anchors.anchors.push_back(a);
        ops_.push_back(std::make_unique<AnchorOperator>(a, *basis_, opt_));
        sel_.scm.per_anchor.push_back(detail::build_anchor_boxes(*ops_.back(), basis_->size()));
        sel_.scm.per_anchor.back().constraints.clear();
    }

    /// Exact constraint at every training point for its nearest anchor.
    void assign_constraints() {
        for (std::size_t i = 0; i < sel_.train.size(); ++i) {
            const double mu = sel_.train[i];
            const std::size_t r = nearest_anchor(mu, sel_.anchors);
            AnchorScm& s = sel_.scm.per_anchor[r];
            const bool have = std::any_of(s.constraints.begin(), s.constraints.end(),
                                          [&](const ScmConstraint& c) { return c.mu == mu; });
            if (have) continue;
            ScmConstraint c;
            c.mu = mu;
            c.coeffs = coeffs_[i];
            c.value = ops_[r]->online_infimum(mu, basis_->lift(coeffs_[i]));
            s.constraints.push_back(std::move(c));
        }
    }

    const ReducedBasis* basis_;
    ScmOptions opt_;
    AnchorSelection sel_;
    std::vector<std::unique_ptr<AnchorOperator>> ops_;
    std::vector<Vector> coeffs_;
};

/// Algorithm 1 over the given anchor training sample.
[[nodiscard]] inline AnchorSelection select_anchors(const std::vector<double>& train_anchor, const ReducedBasis& basis,
                                                    const ScmOptions& opt = {}) {
    ScmBuilder b(basis, train_anchor, opt);
    b.select();
    return b.selection();
}

}  // namespace hjbrb

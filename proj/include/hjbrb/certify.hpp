#pragma once

// Brezzi-Rappaz-Raviart ingredients: Lipschitz constant of DG, exact inf-sup
// constants, the indicator tau and the error bound Delta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "hjbrb/assembly.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/lanczos.hpp"
#include "hjbrb/system.hpp"

namespace hjbrb {

struct LipschitzConstants {
    double rho_L0 = 0.0;
    double rho_L1 = 0.0;
    double rho_L2 = 0.0;
    double rho_f1 = 0.0;
    double rho_f2 = 0.0;
    double rho = 0.0;
};

/// rho_L0 = rho_L1 = max_i ||row_i(Dx)||_2, the norm of (gamma, u) -> diag(gamma) Dx u;
/// rho_f1 = max discount. Higher derivatives vanish for the quadratic model.
[[nodiscard]] inline LipschitzConstants lipschitz_constants(const AffineSystem& sys) {
    LipschitzConstants L;
    const RowStencil& d = sys.dx_level;
    double row = 0.0;
    for (std::size_t j = 0; j < d.diag.size(); ++j)
        row = std::max(row, std::sqrt(d.lower[j] * d.lower[j] + d.diag[j] * d.diag[j] + d.upper[j] * d.upper[j]));
    L.rho_L0 = row;
    L.rho_L1 = row;
    L.rho_f1 = sys.discount.size() > 0 ? sys.discount.maxCoeff() : 0.0;
    L.rho = L.rho_L0 + 2.0 * L.rho_L1 + L.rho_L2 + L.rho_f1 + L.rho_f2;
    return L;
}

struct BetaResult {
    double beta = 0.0;
    bool singular = false;
    int iterations = 0;
    bool converged = false;
};

struct BetaOptions {
    double tol = 1e-10;
    int max_iter = 500;
};

/// Smallest singular value from the largest eigenvalue of A^{-1} A^{-T}.
template <class Solve, class SolveT>
[[nodiscard]] BetaResult smallest_singular_value(Solve&& solve, SolveT&& solve_t, Eigen::Index n,
                                                 const BetaOptions& opt = {}) {
    linalg::LanczosOptions lo;
    lo.tol = opt.tol;
    lo.max_iter = opt.max_iter;
    lo.want_min = false;
    auto op = [&](const Vector& v) { return Vector(solve(solve_t(v))); };
    const auto r = linalg::lanczos_extremes(op, n, lo);
    BetaResult out;
    out.iterations = r.iterations;
    out.converged = r.converged;
    if (!(r.lambda_max > 0.0) || !std::isfinite(r.lambda_max)) {
        out.singular = true;
        return out;
    }
    out.beta = 1.0 / std::sqrt(r.lambda_max);
    return out;
}

namespace detail {

/// lambda_min(A) for symmetric positive semidefinite sparse A by shift-invert
/// Lanczos on (A - s I)^{-1}; s is certified below lambda_min through the
/// inertia of an LDL^T factorization.
inline BetaResult normal_equation_beta(const SparseMatrix& ata, double upper_estimate,
                                       const BetaOptions& opt) {
    BetaResult out;
    const Eigen::Index n = ata.rows();
    SparseMatrix eye(n, n);
    eye.setIdentity();
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    double rel = 2e-5;
    for (int attempt = 0; attempt < 16; ++attempt, rel *= 4.0) {
        const double shift = attempt == 15 ? 0.0 : upper_estimate * (1.0 - std::min(rel, 0.999));
        ldlt.compute(SparseMatrix(ata - shift * eye));
        if (ldlt.info() != Eigen::Success) continue;
        if ((ldlt.vectorD().array() <= 0.0).any()) continue;
        linalg::LanczosOptions lo;
        lo.tol = opt.tol;
        lo.max_iter = opt.max_iter;
        lo.want_min = false;
        const auto r = linalg::lanczos_extremes([&](const Vector& v) { return Vector(ldlt.solve(v)); }, n, lo);
        out.iterations += r.iterations;
        out.converged = r.converged;
        const double lam = shift + 1.0 / r.lambda_max;
        out.beta = std::sqrt(std::max(lam, 0.0));
        return out;
    }
    out.singular = true;
    out.converged = true;
    return out;
}

inline double max_abs(const SparseMatrix& A) {
    return A.nonZeros() > 0 ? Eigen::Map<const Vector>(A.valuePtr(), A.nonZeros()).cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace detail

/// Generic sparse path (sparse LU, then shift-invert on A^T A).
[[nodiscard]] inline BetaResult exact_beta(const SparseMatrix& A, const BetaOptions& opt = {}) {
    BetaResult out;
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
        out.singular = true;
        return out;
    }
    linalg::LanczosOptions lo;
    lo.tol = 1e-4;
    lo.max_iter = 40;
    lo.want_min = false;
    auto op = [&](const Vector& v) {
        const Vector w = lu.transpose().solve(v);
        return Vector(lu.solve(w));
    };
    const auto r = linalg::lanczos_extremes(op, A.rows(), lo);
    const double scale = std::max(1.0, detail::max_abs(A));
    if (!(r.lambda_max > 0.0) || !std::isfinite(r.lambda_max) || 1.0 / std::sqrt(r.lambda_max) <= 1e-14 * scale) {
        out.singular = true;
        return out;
    }
    const SparseMatrix ata = SparseMatrix(A.transpose()) * A;
    out = detail::normal_equation_beta(ata, 1.0 / r.lambda_max, opt);
    if (!out.singular && out.beta <= 1e-14 * scale) {
        out.beta = 0.0;
        out.singular = true;
    }
    if (!out.singular && !out.converged)
        throw NumericalError("exact_beta: Lanczos did not converge in " + std::to_string(out.iterations) +
                             " iterations");
    return out;
}

/// Inexpensive estimate from structured solves; converges slowly when the
/// smallest singular values cluster, so the result is only an upper bound
/// accurate to roughly the requested tolerance.
[[nodiscard]] inline BetaResult estimate_beta(double mu, const TruthState& state, const AffineSystem& sys,
                                              const BetaOptions& opt = {1e-6, 60}) {
    const JacobianSolver J(mu, state, sys);
    if (J.singular()) return {0.0, true, 0, true};
    return smallest_singular_value([&](const Vector& v) { return J.solve(v); },
                                   [&](const Vector& v) { return J.solve_transpose(v); },
                                   static_cast<Eigen::Index>(2 * sys.size()), opt);
}

/// Structured path for DG(mu) at a linearization point.
[[nodiscard]] inline BetaResult exact_beta(double mu, const TruthState& state, const AffineSystem& sys,
                                           const BetaOptions& opt = {}) {
    const BetaResult guess = estimate_beta(mu, state, sys, {1e-7, 60});
    if (guess.singular) return guess;
    const SparseMatrix J = eval_DG(mu, state, sys).assembled();
    const SparseMatrix ata = SparseMatrix(J.transpose()) * J;
    BetaResult out = detail::normal_equation_beta(ata, guess.beta * guess.beta, opt);
    out.iterations += guess.iterations;
    if (!out.singular && !out.converged)
        throw NumericalError("exact_beta: Lanczos did not converge in " + std::to_string(out.iterations) +
                             " iterations");
    return out;
}

struct Certificate {
    double mu = 0.0;
    double beta_lb = 0.0;
    double residual = 0.0;
    double tau_ub = 0.0;
    std::optional<double> delta;
    bool rigorous = false;  ///< beta_lb > 0 and tau_ub <= 1
};

struct Indicator {
    double tau_ub;
    std::optional<double> delta;
};

/// tau = 2 rho res / beta^2; Delta = (beta / rho)(1 - sqrt(1 - tau)) for tau <= 1.
[[nodiscard]] inline Indicator indicator_and_bound(double rho, double beta_lb, double residual) {
    if (!(beta_lb > 0.0)) return {std::numeric_limits<double>::infinity(), std::nullopt};
    const double tau = 2.0 * rho * residual / (beta_lb * beta_lb);
    if (!(tau <= 1.0)) return {tau, std::nullopt};
    // 1 - sqrt(1 - tau) = tau / (1 + sqrt(1 - tau)) avoids cancellation at small tau
    return {tau, (beta_lb / rho) * (tau / (1.0 + std::sqrt(1.0 - tau)))};
}

[[nodiscard]] inline Certificate make_certificate(double mu, double rho, double beta_lb, double residual) {
    Certificate c;
    c.mu = mu;
    c.beta_lb = beta_lb;
    c.residual = residual;
    const Indicator ind = indicator_and_bound(rho, beta_lb, residual);
    c.tau_ub = ind.tau_ub;
    c.delta = ind.delta;
    c.rigorous = ind.delta.has_value();
    return c;
}

struct BrrReport {
    std::vector<double> steps;           ///< ||x_{k+1} - x_k||
    std::vector<double> ratios;          ///< steps[k+1] / steps[k]
    std::vector<double> distances;       ///< ||x_k - xbar||
    double radius = 0.0;                 ///< ball radius of the fixed-point argument
    bool contracting = true;
    bool in_ball = true;
    Vector final_point;
};

/// Iterates H(x) = x - DG(xbar)^{-1} G(x) from xbar for a generic system.
template <class Residual, class SolveJbar>
[[nodiscard]] BrrReport brr_iterate(Residual&& G, SolveJbar&& solve_jbar, const Vector& xbar, int steps,
                                    double radius) {
    BrrReport rep;
    rep.radius = radius;
    Vector x = xbar;
    rep.distances.push_back(0.0);
    const double floor = 1e-13 * std::max(1.0, xbar.norm());
    for (int k = 0; k < steps; ++k) {
        const Vector dx = solve_jbar(G(x));
        x -= dx;
        const double s = dx.norm();
        if (!rep.steps.empty() && rep.steps.back() > floor) {
            const double r = s / rep.steps.back();
            rep.ratios.push_back(r);
            if (!(r < 1.0)) rep.contracting = false;
        }
        rep.steps.push_back(s);
        const double dist = (x - xbar).norm();
        rep.distances.push_back(dist);
        if (dist > radius * (1.0 + 1e-10) + floor) rep.in_ball = false;
        if (s <= floor) break;
    }
    rep.final_point = x;
    return rep;
}

/// Empirical check of the BRR hypotheses at (mu, xbar) on the HJB system.
[[nodiscard]] inline BrrReport brr_selfcheck(double mu, const TruthState& xbar, const AffineSystem& sys,
                                             int steps = 20, std::optional<double> beta = std::nullopt) {
    const LipschitzConstants L = lipschitz_constants(sys);
    const double b = beta ? *beta : exact_beta(mu, xbar, sys).beta;
    const double res = y_norm(eval_G(mu, xbar, sys));
    const Indicator ind = indicator_and_bound(L.rho, b, res);
    const JacobianSolver J(mu, xbar, sys);
    if (J.singular()) throw NumericalError("brr_selfcheck: singular Jacobian at the base point");
    auto G = [&](const Vector& x) { return eval_G(mu, TruthState::from_stacked(x), sys).stacked(); };
    auto solve = [&](const Vector& y) { return J.solve(y); };
    BrrReport rep = brr_iterate(G, solve, xbar.stacked(), steps, ind.delta.value_or(0.0));
    if (!ind.delta) rep.in_ball = false;
    return rep;
}

}  // namespace hjbrb

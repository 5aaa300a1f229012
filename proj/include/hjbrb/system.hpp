#pragma once

// Optimality system G(mu)(gamma, u) = (g1, g2) with
//   g1 = d_gamma [L - f] = -Dx u - gamma * discount
//   g2 = L - f           = B u + mu Dx u - gamma Dx u - gamma^2/2 discount - rhs0
// and its derivatives. Norms on X and Y are Euclidean on R^{2N}.

#include <cstddef>
#include <vector>

#include "hjbrb/assembly.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/space_time.hpp"
#include "hjbrb/linalg/types.hpp"

namespace hjbrb {

struct SystemEval {
    Vector g1;
    Vector g2;

    [[nodiscard]] Vector stacked() const {
        Vector y(g1.size() + g2.size());
        y << g1, g2;
        return y;
    }
};

struct SystemJacobian {
    SparseMatrix A11;  ///< -diag(discount)
    SparseMatrix A12;  ///< -Dx
    SparseMatrix A21;  ///< diag(g1)
    SparseMatrix A22;  ///< B + mu Dx - diag(gamma) Dx

    [[nodiscard]] Vector apply(const Vector& x) const {
        const Eigen::Index n = A11.rows();
        Vector y(2 * n);
        y.head(n) = A11 * x.head(n) + A12 * x.tail(n);
        y.tail(n) = A21 * x.head(n) + A22 * x.tail(n);
        return y;
    }

    [[nodiscard]] Vector apply_transpose(const Vector& y) const {
        const Eigen::Index n = A11.rows();
        Vector x(2 * n);
        x.head(n) = A11.transpose() * y.head(n) + A21.transpose() * y.tail(n);
        x.tail(n) = A12.transpose() * y.head(n) + A22.transpose() * y.tail(n);
        return x;
    }

    /// The 2N x 2N block matrix [[A11, A12], [A21, A22]].
    [[nodiscard]] SparseMatrix assembled() const {
        const Eigen::Index n = A11.rows();
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(A11.nonZeros() + A12.nonZeros() + A21.nonZeros() +
                                           A22.nonZeros()));
        auto push = [&t](const SparseMatrix& a, Eigen::Index r0, Eigen::Index c0) {
            for (int k = 0; k < a.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(a, k); it; ++it)
                    t.emplace_back(static_cast<int>(it.row() + r0), static_cast<int>(it.col() + c0),
                                   it.value());
        };
        push(A11, 0, 0);
        push(A12, 0, n);
        push(A21, n, 0);
        push(A22, n, n);
        SparseMatrix m(2 * n, 2 * n);
        m.setFromTriplets(t.begin(), t.end());
        return m;
    }
};

namespace detail {

inline SparseMatrix diagonal(const Vector& v) {
    SparseMatrix m(v.size(), v.size());
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), v[i]);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

/// Stencil value of (Dx u)_i and (B u)_i in extended precision.
struct StencilSums {
    long double dxu;
    long double bu;
};

inline StencilSums stencil_sums(const AffineSystem& sys, const Vector& u, std::size_t k, std::size_t j) {
    const std::size_t nx = sys.grid.nx;
    const std::size_t i = k * nx + j;
    const RowStencil& b = sys.b_level;
    const RowStencil& d = sys.dx_level;
    long double dxu = static_cast<long double>(d.diag[j]) * u[static_cast<Eigen::Index>(i)];
    long double bu = static_cast<long double>(b.diag[j]) * u[static_cast<Eigen::Index>(i)];
    if (j > 0) {
        const long double v = u[static_cast<Eigen::Index>(i - 1)];
        dxu += static_cast<long double>(d.lower[j]) * v;
        bu += static_cast<long double>(b.lower[j]) * v;
    }
    if (j + 1 < nx) {
        const long double v = u[static_cast<Eigen::Index>(i + 1)];
        dxu += static_cast<long double>(d.upper[j]) * v;
        bu += static_cast<long double>(b.upper[j]) * v;
    }
    if (k + 1 < sys.grid.levels()) bu -= static_cast<long double>(sys.coupling) * u[static_cast<Eigen::Index>(i + nx)];
    return {dxu, bu};
}

inline void check_state(const AffineSystem& sys, const TruthState& s) {
    if (static_cast<std::size_t>(s.u.size()) != sys.size() ||
        static_cast<std::size_t>(s.gamma.size()) != sys.size())
        throw ConfigError("state length does not match the grid");
}

}  // namespace detail

/// Residual evaluated with extended-precision accumulation.
[[nodiscard]] inline SystemEval eval_G(double mu, const TruthState& state, const AffineSystem& sys) {
    detail::check_state(sys, state);
    const Grid& g = sys.grid;
    const auto n = static_cast<Eigen::Index>(g.size());
    SystemEval e{Vector(n), Vector(n)};
    const long double m = mu;
    for (std::size_t k = 0; k < g.levels(); ++k) {
        for (std::size_t j = 0; j < g.nx; ++j) {
            const auto i = static_cast<Eigen::Index>(g.index(k, j));
            const auto [dxu, bu] = detail::stencil_sums(sys, state.u, k, j);
            const long double gam = state.gamma[i];
            const long double disc = sys.discount[i];
            e.g1[i] = static_cast<double>(-dxu - gam * disc);
            e.g2[i] = static_cast<double>(bu + (m - gam) * dxu - 0.5L * gam * gam * disc -
                                          static_cast<long double>(sys.rhs0[i]));
        }
    }
    return e;
}

[[nodiscard]] inline SystemJacobian eval_DG(double mu, const TruthState& state, const AffineSystem& sys) {
    detail::check_state(sys, state);
    const Vector dxu = sys.Dx * state.u;
    const Vector g1 = -dxu - state.gamma.cwiseProduct(sys.discount);
    SystemJacobian J;
    J.A11 = detail::diagonal(-sys.discount);
    J.A12 = -sys.Dx;
    J.A21 = detail::diagonal(g1);
    const Vector w = Vector::Constant(state.u.size(), mu) - state.gamma;
    J.A22 = sys.B + detail::diagonal(w) * sys.Dx;
    return J;
}

/// D^2 G(x)(d1, d2); independent of x because G is quadratic.
[[nodiscard]] inline SystemEval second_derivative(const TruthState& d1, const TruthState& d2,
                                                  const AffineSystem& sys) {
    const Vector dxu1 = sys.Dx * d1.u;
    const Vector dxu2 = sys.Dx * d2.u;
    SystemEval e;
    e.g1 = Vector::Zero(d1.u.size());
    e.g2 = -d1.gamma.cwiseProduct(dxu2) - d2.gamma.cwiseProduct(dxu1) -
           sys.discount.cwiseProduct(d1.gamma).cwiseProduct(d2.gamma);
    return e;
}

[[nodiscard]] inline double y_norm(const SystemEval& e) {
    return std::sqrt(e.g1.squaredNorm() + e.g2.squaredNorm());
}

[[nodiscard]] inline double x_norm(const TruthState& s) {
    return std::sqrt(s.gamma.squaredNorm() + s.u.squaredNorm());
}

/// Riesz representative in Y of x -> <DG(mu_bar)(xbar) x, .>; with the
/// Euclidean inner product this is the Jacobian image itself.
[[nodiscard]] inline Vector supremizer(double mu_bar, const TruthState& xbar, const Vector& x,
                                       const AffineSystem& sys) {
    return eval_DG(mu_bar, xbar, sys).apply(x);
}

/// Structured solves with DG(mu)(gamma, u) through the Schur complement
///   S = B + diag(mu - gamma - g1 / discount) Dx
/// of the diagonal block -diag(discount).
class JacobianSolver {
public:
    JacobianSolver(double mu, const TruthState& state, const AffineSystem& sys)
        : sys_(&sys), schur_(sys, schur_weights(mu, state, sys)) {
        g1_ = -(sys.Dx * state.u) - state.gamma.cwiseProduct(sys.discount);
    }

    [[nodiscard]] bool singular() const noexcept { return schur_.singular(); }

    /// x with DG x = y.
    [[nodiscard]] Vector solve(const Vector& y) const {
        const Eigen::Index n = g1_.size();
        const Vector b1 = y.head(n);
        const Vector dinv_b1 = b1.cwiseQuotient(sys_->discount);
        const Vector q = schur_.solve(y.tail(n) + g1_.cwiseProduct(dinv_b1));
        Vector x(2 * n);
        x.head(n) = -(b1 + sys_->Dx * q).cwiseQuotient(sys_->discount);
        x.tail(n) = q;
        return x;
    }

    /// x with DG^T x = y.
    [[nodiscard]] Vector solve_transpose(const Vector& y) const {
        const Eigen::Index n = g1_.size();
        const Vector b1 = y.head(n);
        const Vector dinv_b1 = b1.cwiseQuotient(sys_->discount);
        const Vector q = schur_.solve_transpose(y.tail(n) - sys_->Dx.transpose() * dinv_b1);
        Vector x(2 * n);
        x.head(n) = (g1_.cwiseProduct(q) - b1).cwiseQuotient(sys_->discount);
        x.tail(n) = q;
        return x;
    }

private:
    static Vector schur_weights(double mu, const TruthState& state, const AffineSystem& sys) {
        const Vector g1 = -(sys.Dx * state.u) - state.gamma.cwiseProduct(sys.discount);
        return (Vector::Constant(state.u.size(), mu) - state.gamma - g1.cwiseQuotient(sys.discount)).eval();
    }

    const AffineSystem* sys_;
    linalg::SpaceTimeSolver schur_;
    Vector g1_;
};

}  // namespace hjbrb

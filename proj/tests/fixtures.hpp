#pragma once

// Shared grids, oracles and helpers for the test suites.

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "hjbrb/assembly.hpp"
#include "hjbrb/grid.hpp"
#include "hjbrb/model.hpp"
#include "hjbrb/system.hpp"
#include "hjbrb/truth.hpp"

namespace hjbrb::oracle {

/// 21 space points, 11 time levels.
inline AffineSystem desk_system(const ModelSpec& m = {}) { return assemble(m, build_grid(m, 15.0, 0.1)); }

/// 201 space points, 110 time levels.
inline AffineSystem full_system(const ModelSpec& m = {}) { return assemble(m, build_grid(m, 1.5, 1.0 / 109.0)); }

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

inline TruthState random_state(const AffineSystem& sys, std::mt19937_64& rng, double scale = 1.0) {
    const auto n = static_cast<Eigen::Index>(sys.size());
    return {random_vector(n, rng, scale), random_vector(n, rng, scale)};
}

/// Dense operator of the spatial stencil loop, built directly from the difference formulas.
struct DenseStencil {
    Matrix B, Dx;
    Vector rhs0;
};

inline DenseStencil dense_stencil(const ModelSpec& m, const Grid& g, double eps) {
    const auto n = static_cast<Eigen::Index>(g.size());
    const double c = 0.5 + eps;
    DenseStencil s{Matrix::Zero(n, n), Matrix::Zero(n, n), Vector::Zero(n)};
    const std::size_t nx = g.nx;
    for (std::size_t k = 0; k < g.levels(); ++k) {
        for (std::size_t j = 0; j < nx; ++j) {
            const auto i = static_cast<Eigen::Index>(g.index(k, j));
            // time: (u(t_k) - u(t_{k+1})) / dt with the terminal level as data
            s.B(i, i) += 1.0 / g.dt;
            if (k + 1 < g.levels())
                s.B(i, static_cast<Eigen::Index>(g.index(k + 1, j))) -= 1.0 / g.dt;
            else
                s.rhs0[i] += terminal_condition(g.x(j)) / g.dt;
            // diffusion with ghost points u_{-1} = u_1 - 2 dx g_L and u_{n} = u_{n-2} + 2 dx g_R
            const double w = c / (g.dx * g.dx);
            if (j == 0) {
                s.B(i, i) += 2 * w;
                s.B(i, i + 1) -= 2 * w;
                s.rhs0[i] -= 2 * c * m.g_left / g.dx;
                s.Dx(i, i) = -1.0 / g.dx;
                s.Dx(i, i + 1) = 1.0 / g.dx;
            } else if (j + 1 == nx) {
                s.B(i, i) += 2 * w;
                s.B(i, i - 1) -= 2 * w;
                s.rhs0[i] += 2 * c * m.g_right / g.dx;
                s.Dx(i, i) = 1.0 / g.dx;
                s.Dx(i, i - 1) = -1.0 / g.dx;
            } else {
                s.B(i, i) += 2 * w;
                s.B(i, i - 1) -= w;
                s.B(i, i + 1) -= w;
                s.Dx(i, i + 1) = 0.5 / g.dx;
                s.Dx(i, i - 1) = -0.5 / g.dx;
            }
        }
    }
    return s;
}

/// Dense Jacobian of the optimality system assembled from the pointwise formulas.
inline Matrix dense_jacobian(double mu, const TruthState& x, const AffineSystem& sys) {
    const DenseStencil s = dense_stencil(sys.model, sys.grid, sys.eps_art);
    const auto n = static_cast<Eigen::Index>(sys.size());
    Matrix J = Matrix::Zero(2 * n, 2 * n);
    const Vector du = s.Dx * x.u;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = sys.discount[i];
        J(i, i) = -d;
        J.block(i, n, 1, n) = -s.Dx.row(i);
        J(n + i, i) = -du[i] - x.gamma[i] * d;
        J.block(n + i, n, 1, n) = s.B.row(i) + (mu - x.gamma[i]) * s.Dx.row(i);
    }
    return J;
}

inline double dense_min_singular(const Matrix& A) {
    Eigen::JacobiSVD<Matrix> svd(A);
    return svd.singularValues().minCoeff();
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace hjbrb::oracle

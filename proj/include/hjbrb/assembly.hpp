#pragma once

// Space-time finite-difference pieces of the truth operator
//   L^gamma(mu; u) = B u + mu Dx u - diag(gamma) Dx u - rhs0
// with B = (backward-in-time implicit Euler) - (1/2 + eps_art) d_xx.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "hjbrb/grid.hpp"
#include "hjbrb/linalg/types.hpp"
#include "hjbrb/model.hpp"

namespace hjbrb {

/// Control and value vectors over the unknown grid points.
struct TruthState {
    Vector gamma;
    Vector u;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(u.size()); }

    /// Stacked (gamma, u) in X = R^{2N}.
    [[nodiscard]] Vector stacked() const {
        Vector x(gamma.size() + u.size());
        x << gamma, u;
        return x;
    }

    [[nodiscard]] static TruthState from_stacked(const Vector& x) {
        const Eigen::Index n = x.size() / 2;
        return {x.head(n), x.tail(n)};
    }
};

/// Three-point stencil per spatial row; identical on every time level.
struct RowStencil {
    std::vector<double> lower;  ///< coefficient of u_{j-1}
    std::vector<double> diag;
    std::vector<double> upper;  ///< coefficient of u_{j+1}
};

struct AffineSystem {
    ModelSpec model;
    Grid grid;
    double eps_art = 0.0;
    double diffusion = 0.5;  ///< 1/2 + eps_art
    SparseMatrix B;
    SparseMatrix Dx;
    Vector rhs0;
    Vector discount;
    RowStencil b_level;   ///< level-local part of B
    RowStencil dx_level;  ///< Dx (purely level-local)
    double coupling = 0.0;  ///< B(level k, level k+1) = -coupling * I

    [[nodiscard]] std::size_t size() const noexcept { return grid.size(); }
};

/// Smallest eps making central differences Peclet-stable for drift up to
/// mu_hi + gamma_cap: eps = max(0, b dx / 2 - 1/2).
[[nodiscard]] inline double artificial_diffusion(const ModelSpec& model, const Grid& grid) {
    const double drift = std::max(std::abs(model.mu_lo), std::abs(model.mu_hi)) + gamma_cap(model);
    return std::max(0.0, drift * grid.dx / 2.0 - 0.5);
}

[[nodiscard]] inline AffineSystem assemble(const ModelSpec& model, const Grid& grid) {
    model.validate();
    model.check_compatibility();

    AffineSystem sys;
    sys.model = model;
    sys.grid = grid;
    sys.eps_art = artificial_diffusion(model, grid);
    sys.diffusion = 0.5 + sys.eps_art;

    const std::size_t nx = grid.nx;
    const std::size_t levels = grid.levels();
    const std::size_t n = grid.size();
    const double c = sys.diffusion;
    const double dx = grid.dx;
    const double inv_dt = 1.0 / grid.dt;
    const double h2 = c / (dx * dx);

    RowStencil& bs = sys.b_level;
    bs.lower.assign(nx, 0.0);
    bs.diag.assign(nx, inv_dt + 2.0 * h2);
    bs.upper.assign(nx, 0.0);
    for (std::size_t j = 1; j + 1 < nx; ++j) {
        bs.lower[j] = -h2;
        bs.upper[j] = -h2;
    }
    // ghost-point elimination for u' = g
    bs.upper[0] = -2.0 * h2;
    bs.lower[nx - 1] = -2.0 * h2;

    RowStencil& ds = sys.dx_level;
    ds.lower.assign(nx, 0.0);
    ds.diag.assign(nx, 0.0);
    ds.upper.assign(nx, 0.0);
    for (std::size_t j = 1; j + 1 < nx; ++j) {
        ds.lower[j] = -0.5 / dx;
        ds.upper[j] = 0.5 / dx;
    }
    ds.diag[0] = -1.0 / dx;
    ds.upper[0] = 1.0 / dx;
    ds.diag[nx - 1] = 1.0 / dx;
    ds.lower[nx - 1] = -1.0 / dx;

    sys.coupling = inv_dt;

    std::vector<Triplet> bt, dt;
    bt.reserve(4 * n);
    dt.reserve(3 * n);
    sys.rhs0 = Vector::Zero(static_cast<Eigen::Index>(n));
    sys.discount.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < levels; ++k) {
        const double disc = discount_factor(model, grid.t(k));
        for (std::size_t j = 0; j < nx; ++j) {
            const auto i = static_cast<int>(grid.index(k, j));
            sys.discount[i] = disc;
            bt.emplace_back(i, i, bs.diag[j]);
            dt.emplace_back(i, i, ds.diag[j]);
            if (j > 0) {
                bt.emplace_back(i, i - 1, bs.lower[j]);
                dt.emplace_back(i, i - 1, ds.lower[j]);
            }
            if (j + 1 < nx) {
                bt.emplace_back(i, i + 1, bs.upper[j]);
                dt.emplace_back(i, i + 1, ds.upper[j]);
            }
            if (k + 1 < levels) {
                bt.emplace_back(i, static_cast<int>(grid.index(k + 1, j)), -inv_dt);
            } else {
                sys.rhs0[i] += inv_dt * terminal_condition(grid.x(j));
            }
        }
        const auto i0 = static_cast<int>(grid.index(k, 0));
        const auto i1 = static_cast<int>(grid.index(k, nx - 1));
        sys.rhs0[i0] += -2.0 * c * model.g_left / dx;
        sys.rhs0[i1] += 2.0 * c * model.g_right / dx;
    }
    sys.B.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.B.setFromTriplets(bt.begin(), bt.end());
    sys.Dx.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.Dx.setFromTriplets(dt.begin(), dt.end());
    return sys;
}

/// Terminal data replicated on every unknown level.
[[nodiscard]] inline Vector terminal_extension(const AffineSystem& sys) {
    const Grid& g = sys.grid;
    Vector u(static_cast<Eigen::Index>(g.size()));
    for (std::size_t k = 0; k < g.levels(); ++k)
        for (std::size_t j = 0; j < g.nx; ++j)
            u[static_cast<Eigen::Index>(g.index(k, j))] = terminal_condition(g.x(j));
    return u;
}

}  // namespace hjbrb

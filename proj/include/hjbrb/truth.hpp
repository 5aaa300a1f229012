#pragma once

// Truth solver: policy iteration on the discretized HJB system.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hjbrb/assembly.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/space_time.hpp"
#include "hjbrb/system.hpp"

namespace hjbrb {

/// gamma_i = -(Dx u)_i / discount_i, the maximizer of -g p - g^2/2 d.
[[nodiscard]] inline Vector pointwise_argmax(const Vector& u, const AffineSystem& sys) {
    if (static_cast<std::size_t>(u.size()) != sys.size())
        throw ConfigError("pointwise_argmax: length mismatch");
    return (-(sys.Dx * u)).cwiseQuotient(sys.discount);
}

struct HowardOptions {
    double tol = 1e-10;
    int max_iter = 100;
    int refinement_steps = 2;  ///< iterative refinement sweeps per linear solve
};

struct HowardResult {
    TruthState state;
    int iterations = 0;             ///< policy updates performed
    std::vector<double> residuals;  ///< Y-residual after each policy update
};

namespace detail {

/// rhs - (B + diag(w) Dx) u in extended precision.
inline Vector linear_defect(const AffineSystem& sys, const Vector& w, const Vector& rhs, const Vector& u) {
    const Grid& g = sys.grid;
    Vector r(u.size());
    for (std::size_t k = 0; k < g.levels(); ++k) {
        for (std::size_t j = 0; j < g.nx; ++j) {
            const auto i = static_cast<Eigen::Index>(g.index(k, j));
            const auto [dxu, bu] = stencil_sums(sys, u, k, j);
            r[i] = static_cast<double>(static_cast<long double>(rhs[i]) - bu -
                                       static_cast<long double>(w[i]) * dxu);
        }
    }
    return r;
}

}  // namespace detail

[[nodiscard]] inline HowardResult howard_solve(double mu, const AffineSystem& sys,
                                               const HowardOptions& opt = {},
                                               std::optional<Vector> initial_u = std::nullopt) {
    if (!sys.model.contains_mu(mu))
        throw ConfigError("howard_solve: mu = " + std::to_string(mu) + " outside the parameter range");
    if (!(opt.tol > 0.0)) throw ConfigError("howard_solve: tol must be positive");
    if (opt.max_iter < 1) throw ConfigError("howard_solve: max_iter must be >= 1");

    HowardResult out;
    Vector u = initial_u ? std::move(*initial_u) : terminal_extension(sys);
    if (static_cast<std::size_t>(u.size()) != sys.size())
        throw ConfigError("howard_solve: initial guess length mismatch");
    const Eigen::Index n = u.size();

    for (int it = 1; it <= opt.max_iter; ++it) {
        Vector gamma = pointwise_argmax(u, sys);
        TruthState state{std::move(gamma), u};
        const double res = y_norm(eval_G(mu, state, sys));
        out.residuals.push_back(res);
        out.iterations = it;
        if (res <= opt.tol) {
            out.state = std::move(state);
            return out;
        }
        const Vector w = Vector::Constant(n, mu) - state.gamma;
        const Vector rhs =
            sys.rhs0 + 0.5 * sys.discount.cwiseProduct(state.gamma.cwiseProduct(state.gamma));
        const linalg::SpaceTimeSolver S(sys, w);
        if (S.singular()) throw NumericalError("howard_solve: singular policy system");
        u = S.solve(rhs);
        for (int r = 0; r < opt.refinement_steps; ++r) u += S.solve(detail::linear_defect(sys, w, rhs, u));
    }
    throw DivergenceError("howard_solve: no convergence within " + std::to_string(opt.max_iter) +
                              " iterations (last residual " + std::to_string(out.residuals.back()) + ")",
                          out.residuals.back(), opt.max_iter);
}

}  // namespace hjbrb

#pragma once

// EU-ETS instance of the parameterized HJB problem: quadratic discounted
// abatement cost, drift mu - gamma, unit volatility, x^+ terminal penalty.

#include <array>
#include <cmath>
#include <string>

#include "hjbrb/error.hpp"

namespace hjbrb {

inline constexpr int kQL = 2;  ///< operator affine terms: theta_L = (1, mu)
inline constexpr int kQf = 1;  ///< cost affine terms: theta_f = (1)

struct ModelSpec {
    double T = 1.0;
    double domain_lo = -150.0;
    double domain_hi = 150.0;
    double mu_lo = 0.0;
    double mu_hi = 100.0;
    double rate = 0.05;
    double g_left = 0.0;
    double g_right = 1.0;
    int Q_L = kQL;
    int Q_f = kQf;

    /// Throws ConfigError on a malformed model.
    void validate() const {
        if (!(T > 0.0)) throw ConfigError("model: T must be positive");
        if (!(domain_lo < domain_hi)) throw ConfigError("model: domain_lo must be < domain_hi");
        if (!(mu_lo <= mu_hi)) throw ConfigError("model: mu_lo must be <= mu_hi");
        if (Q_L != kQL || Q_f != kQf)
            throw ConfigError("model: the EU-ETS split has Q_L = 2 and Q_f = 1");
    }

    [[nodiscard]] bool contains_mu(double mu) const noexcept { return mu >= mu_lo && mu <= mu_hi; }

    /// Neumann data must match the one-sided slopes of x^+ at the ends.
    void check_compatibility() const {
        auto slope_at = [](double x, bool from_right) {
            if (x > 0.0) return 1.0;
            if (x < 0.0) return 0.0;
            return from_right ? 1.0 : 0.0;
        };
        const double sl = slope_at(domain_lo, true);
        const double sr = slope_at(domain_hi, false);
        if (std::abs(sl - g_left) > 1e-12 || std::abs(sr - g_right) > 1e-12) {
            throw ConfigError("model: Neumann data (" + std::to_string(g_left) + ", " +
                              std::to_string(g_right) +
                              ") incompatible with terminal slopes (" + std::to_string(sl) +
                              ", " + std::to_string(sr) + ")");
        }
    }
};

/// e^{rate (t - T)}
[[nodiscard]] inline double discount_factor(const ModelSpec& m, double t) noexcept {
    return std::exp(m.rate * (t - m.T));
}

/// f^gamma(t) = gamma^2 / 2 * e^{rate (t - T)}; independent of mu and x.
[[nodiscard]] inline double running_cost(const ModelSpec& m, double gamma, double t) noexcept {
    return 0.5 * gamma * gamma * discount_factor(m, t);
}

struct CostDerivatives {
    double first;
    double second;
};

[[nodiscard]] inline CostDerivatives running_cost_derivatives(const ModelSpec& m, double gamma,
                                                              double t) noexcept {
    const double d = discount_factor(m, t);
    return {gamma * d, d};
}

[[nodiscard]] inline double terminal_condition(double x) noexcept { return x > 0.0 ? x : 0.0; }

struct AffineTheta {
    std::array<double, kQL> L;
    std::array<double, kQf> f;
};

/// L^gamma(mu; u) = [dt u - 1/2 u'' - gamma u'] + mu [u'],  f^gamma(mu) = f^gamma.
[[nodiscard]] inline AffineTheta affine_theta(double mu) noexcept {
    return {{1.0, mu}, {1.0}};
}

/// e^{rate T} sup |u_T'|: bound on |gamma| from the pointwise maximizer when |u'| <= sup |u_T'|.
[[nodiscard]] inline double gamma_cap(const ModelSpec& m) noexcept {
    const double slope = m.domain_hi > 0.0 ? 1.0 : 0.0;
    return std::exp(m.rate * m.T) * slope;
}

}  // namespace hjbrb

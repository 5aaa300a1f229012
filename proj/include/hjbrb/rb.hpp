#pragma once

// Two-stage greedy construction of the reduced space and the online
// certificate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hjbrb/certify.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/reduced.hpp"
#include "hjbrb/scm.hpp"
#include "hjbrb/truth.hpp"

namespace hjbrb {

/// Errors below this are at the truth solver's noise level; effectivity is not reported there.
inline constexpr double kEffectivityErrorFloor = 1e-7;

enum class GreedyStatus { converged, exhausted };

struct GreedyRecord {
    std::size_t N = 0;
    int stage = 1;
    double mu_selected = std::numeric_limits<double>::quiet_NaN();
    double max_tau = std::numeric_limits<double>::quiet_NaN();
    double max_delta = std::numeric_limits<double>::quiet_NaN();
};

struct OfflineData {
    ReducedModel reduced;
    std::vector<Vector> basis;  ///< truth-dimensional vectors, used only to lift
    AnchorSet anchors;
    ScmData scm;
    LipschitzConstants lipschitz;
    std::size_t stage1_N = 0;
    GreedyStatus status = GreedyStatus::converged;
    std::string diagnostic;
    std::vector<GreedyRecord> history;
    std::vector<double> anchor_train;
    std::vector<std::vector<double>> anchor_history;
    std::string fingerprint;

    [[nodiscard]] std::size_t N() const noexcept { return reduced.size(); }

    [[nodiscard]] TruthState lift(const ReducedSolution& s) const {
        if (basis.empty()) throw StateError("lift: basis vectors not loaded");
        Vector x = Vector::Zero(basis.front().size());
        for (Eigen::Index k = 0; k < s.coeffs.size(); ++k) x += s.coeffs[k] * basis[static_cast<std::size_t>(k)];
        return TruthState::from_stacked(x);
    }
};

[[nodiscard]] inline ReducedSolution online_solve(double mu, const ReducedModel& rb,
                                                  std::optional<std::size_t> n_use = std::nullopt) {
    return rb.solve(mu, n_use);
}

[[nodiscard]] inline double online_residual_norm(double mu, const Vector& coeffs, const ReducedModel& rb) {
    return rb.residual_norm(mu, coeffs);
}

struct CertifiedSolution {
    ReducedSolution solution;
    Certificate certificate;
    std::size_t anchor = 0;
};

/// Online solve, residual, inf-sup lower bound and BRR bound; cost depends on N only.
[[nodiscard]] inline CertifiedSolution certify_online(double mu, const ReducedModel& rb, const AnchorSet& anchors,
                                                      const ScmData& scm, double rho,
                                                      std::optional<std::size_t> n_use = std::nullopt) {
    if (anchors.R() == 0) throw StateError("certificate: no anchors");
    CertifiedSolution out;
    out.solution = rb.solve(mu, n_use);
    out.anchor = nearest_anchor(mu, anchors);
    const double blb = anchors.anchors[out.anchor].beta_offline *
                       beta_online_lb(mu, out.solution.coeffs, out.anchor, anchors, scm);
    out.certificate = make_certificate(mu, rho, blb, out.solution.residual);
    return out;
}

[[nodiscard]] inline Certificate certificate(double mu, const OfflineData& off,
                                             std::optional<std::size_t> n_use = std::nullopt) {
    return certify_online(mu, off.reduced, off.anchors, off.scm, off.lipschitz.rho, n_use).certificate;
}

struct GreedyOptions {
    std::vector<double> train;
    std::vector<double> anchor_train;
    double eps_tol = 1e-2;
    std::size_t max_basis = 30;
    HowardOptions howard{};
    ScmOptions scm{};
    BetaOptions stage1_beta{1e-4, 40};
    double refresh_ratio = 0.25;
    double duplicate_tol = 1e-10;
    std::function<void(const std::string&)> log;
};

namespace detail {

inline std::size_t nearest_index(const std::vector<double>& xs, double target) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double d = std::abs(xs[i] - target), db = std::abs(xs[best] - target);
        if (d < db || (d == db && xs[i] < xs[best])) best = i;
    }
    return best;
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

/// Stage 1 extends at argmax tau (exact-type beta) until max tau < 1; stage 2
/// builds anchors and extends at argmax Delta until max Delta <= eps_tol.
[[nodiscard]] inline OfflineData greedy_offline(const AffineSystem& sys, const GreedyOptions& opt) {
    if (opt.train.empty()) throw ConfigError("greedy: empty training sample");
    if (!(opt.eps_tol > 0.0)) throw ConfigError("greedy: eps_tol must be positive");
    if (opt.max_basis < 1) throw ConfigError("greedy: max_basis must be >= 1");
    for (double mu : opt.train)
        if (!sys.model.contains_mu(mu)) throw ConfigError("greedy: training parameter outside the range");
    auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };

    OfflineData off;
    off.lipschitz = lipschitz_constants(sys);
    const double rho = off.lipschitz.rho;
    ReducedBasis rb(sys);
    std::vector<bool> excluded(opt.train.size(), false);

    auto extend = [&](std::size_t idx) {
        const double mu = opt.train[idx];
        const HowardResult truth = howard_solve(mu, sys, opt.howard);
        if (!rb.add_snapshot(mu, truth.state, opt.duplicate_tol)) {
            log("duplicate snapshot at mu=" + detail::fmt(mu) + " skipped");
            excluded[idx] = true;
            return false;
        }
        log("N=" + std::to_string(rb.size()) + " added mu=" + detail::fmt(mu));
        return true;
    };

    const ModelSpec& m = sys.model;
    extend(detail::nearest_index(opt.train, 0.5 * (m.mu_lo + m.mu_hi)));

    // stage 1
    while (true) {
        double worst = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < opt.train.size(); ++i) {
            const ReducedSolution s = rb.model().solve(opt.train[i]);
            const BetaResult b = estimate_beta(opt.train[i], rb.lift(s.coeffs), sys, opt.stage1_beta);
            const double tau = b.beta > 0.0 ? 2.0 * rho * s.residual / (b.beta * b.beta)
                                             : std::numeric_limits<double>::infinity();
            if (!excluded[i] && tau > worst) {
                worst = tau;
                arg = i;
            }
        }
        GreedyRecord rec{rb.size(), 1, std::numeric_limits<double>::quiet_NaN(), worst,
                         std::numeric_limits<double>::quiet_NaN()};
        log("stage 1 N=" + std::to_string(rb.size()) + " max tau " + detail::fmt(worst));
        if (worst < 1.0) {
            off.history.push_back(rec);
            break;
        }
        if (rb.size() >= opt.max_basis) {
            off.history.push_back(rec);
            off.status = GreedyStatus::exhausted;
            off.diagnostic = "stage 1 exhausted " + std::to_string(opt.max_basis) +
                             " basis vectors; worst mu=" + detail::fmt(opt.train[arg]) + " tau=" + detail::fmt(worst);
            break;
        }
        rec.mu_selected = opt.train[arg];
        off.history.push_back(rec);
        extend(arg);
    }
    off.stage1_N = rb.size();

    // stage 2
    ScmBuilder scm(rb, opt.anchor_train.empty() ? opt.train : opt.anchor_train, opt.scm);
    scm.select(opt.log);
    if (off.status == GreedyStatus::converged) {
        while (true) {
            double worst = -1.0, worst_tau = 0.0;
            std::size_t arg = 0;
            bool stale = false;
            for (int attempt = 0; attempt < 2; ++attempt) {
                worst = -1.0;
                worst_tau = 0.0;
                stale = false;
                const AnchorSelection& sel = scm.selection();
                for (std::size_t i = 0; i < opt.train.size(); ++i) {
                    const CertifiedSolution c = certify_online(opt.train[i], rb.model(), sel.anchors, sel.scm, rho);
                    const double delta = c.certificate.delta.value_or(std::numeric_limits<double>::infinity());
                    if (c.certificate.beta_lb < opt.refresh_ratio * sel.anchors.anchors[c.anchor].beta_offline)
                        stale = true;
                    worst_tau = std::max(worst_tau, c.certificate.tau_ub);
                    if (!excluded[i] && delta > worst) {
                        worst = delta;
                        arg = i;
                    }
                }
                if (!stale || attempt == 1) break;
                log("anchor data stale; rebuilding");
                scm.select(opt.log);
            }
            GreedyRecord rec{rb.size(), 2, std::numeric_limits<double>::quiet_NaN(), worst_tau, worst};
            log("stage 2 N=" + std::to_string(rb.size()) + " max delta " + detail::fmt(worst));
            if (worst <= opt.eps_tol) {
                off.history.push_back(rec);
                break;
            }
            if (rb.size() >= opt.max_basis) {
                off.history.push_back(rec);
                off.status = GreedyStatus::exhausted;
                off.diagnostic = "stage 2 exhausted " + std::to_string(opt.max_basis) +
                                 " basis vectors; worst mu=" + detail::fmt(opt.train[arg]) +
                                 " delta=" + detail::fmt(worst);
                break;
            }
            rec.mu_selected = opt.train[arg];
            off.history.push_back(rec);
            if (extend(arg)) scm.extend();
        }
    }

    const AnchorSelection& sel = scm.selection();
    off.anchors = sel.anchors;
    off.scm = sel.scm;
    off.anchor_train = sel.train;
    off.anchor_history = sel.history;
    off.reduced = rb.model();
    off.basis = rb.vectors();
    if (!off.diagnostic.empty()) log(off.diagnostic);
    return off;
}

}  // namespace hjbrb

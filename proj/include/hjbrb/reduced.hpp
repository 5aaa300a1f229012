#pragma once

// Reduced space X_N = span{xi_n} and the parameter-separated residual.
//
// For x = sum_n c_n xi_n the residual is G(mu)(x) = V phi(mu, c) with columns
//   v_0          = (0, -rhs0)                                    phi = 1
//   b_n          = (-Dx xi^u_n - d xi^g_n, B xi^u_n)             phi = c_n
//   e_n          = (0, Dx xi^u_n)                                phi = mu c_n
//   q_mn (m < n) = (0, -xi^g_m Dx xi^u_n - xi^g_n Dx xi^u_m - d xi^g_m xi^g_n)  phi = c_m c_n
//   q_nn         = (0, -xi^g_n Dx xi^u_n - d (xi^g_n)^2 / 2)     phi = c_n^2
// Columns are grouped per basis vector, so the first P(N') columns describe
// the leading N' vectors. Only the triangular factor R of V = Q R is kept
// online: ||G|| = ||R phi||, which avoids the cancellation of a Gram form.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/QR>

#include "hjbrb/assembly.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/types.hpp"

namespace hjbrb {

[[nodiscard]] constexpr std::size_t affine_columns(std::size_t n_basis) noexcept {
    return 1 + 2 * n_basis + n_basis * (n_basis + 1) / 2;
}

/// First column of the block belonging to basis vector n (0-based).
[[nodiscard]] constexpr std::size_t block_offset(std::size_t n) noexcept { return affine_columns(n); }

/// phi(mu, c) for the leading c.size() basis vectors.
[[nodiscard]] inline Vector affine_phi(double mu, const Vector& c) {
    const auto N = static_cast<std::size_t>(c.size());
    Vector phi(static_cast<Eigen::Index>(affine_columns(N)));
    phi[0] = 1.0;
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t o = block_offset(n);
        const double cn = c[static_cast<Eigen::Index>(n)];
        phi[static_cast<Eigen::Index>(o)] = cn;
        phi[static_cast<Eigen::Index>(o + 1)] = mu * cn;
        for (std::size_t m = 0; m <= n; ++m)
            phi[static_cast<Eigen::Index>(o + 2 + m)] = c[static_cast<Eigen::Index>(m)] * cn;
    }
    return phi;
}

struct ReducedSolution {
    Vector coeffs;
    double mu = 0.0;
    int newton_iters = 0;
    double residual = 0.0;
    bool converged = false;
};

struct OnlineOptions {
    int max_iter = 50;
    double step_tol = 1e-13;      ///< ||dc|| <= step_tol (1 + ||c||)
    double gradient_tol = 1e-12;  ///< ||J^T r|| <= gradient_tol ||J|| ||r||
};

/// Online part of the reduced basis: everything sized by N only.
struct ReducedModel {
    Matrix R;                         ///< upper triangular, affine_columns(N) square
    std::vector<double> snapshot_mu;  ///< S_N in insertion order
    std::vector<Vector> snapshot_coeffs;

    [[nodiscard]] std::size_t size() const noexcept { return snapshot_mu.size(); }

    /// ||G(mu)(sum c_n xi_n)||_Y using the leading c.size() basis vectors.
    [[nodiscard]] double residual_norm(double mu, const Vector& c) const {
        const auto p = static_cast<Eigen::Index>(affine_columns(static_cast<std::size_t>(c.size())));
        const Vector phi = affine_phi(mu, c);
        return (R.topLeftCorner(p, p).triangularView<Eigen::Upper>() * phi).norm();
    }

    /// Coefficients of the snapshot nearest to mu, truncated to n vectors.
    [[nodiscard]] Vector initial_guess(double mu, std::size_t n) const {
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n && s < snapshot_mu.size(); ++s) {
            const double d = std::abs(snapshot_mu[s] - mu);
            if (d < dist || (d == dist && snapshot_mu[s] < snapshot_mu[best])) {
                dist = d;
                best = s;
            }
        }
        Vector c = Vector::Zero(static_cast<Eigen::Index>(n));
        const Vector& sc = snapshot_coeffs[best];
        const Eigen::Index k = std::min<Eigen::Index>(sc.size(), c.size());
        c.head(k) = sc.head(k);
        return c;
    }

    /// Gauss-Newton on ||R phi(mu, c)|| over the leading n basis vectors.
    [[nodiscard]] ReducedSolution solve(double mu, std::optional<std::size_t> n_use = std::nullopt,
                                        const OnlineOptions& opt = {}) const {
        const std::size_t n = n_use.value_or(size());
        if (n == 0 || n > size()) throw StateError("online_solve: basis is empty or too small");
        const auto p = static_cast<Eigen::Index>(affine_columns(n));
        const auto Rn = R.topLeftCorner(p, p).triangularView<Eigen::Upper>();
        const auto N = static_cast<Eigen::Index>(n);

        ReducedSolution sol;
        sol.mu = mu;
        Vector c = initial_guess(mu, n);
        Vector r = Rn * affine_phi(mu, c);
        double f = r.norm();
        Matrix Jr(p, N);
        for (int it = 1; it <= opt.max_iter; ++it) {
            sol.newton_iters = it;
            jacobian(mu, c, p, Jr);
            const double jn = Jr.norm();
            const double g = (Jr.transpose() * r).norm();
            if (f == 0.0 || g <= opt.gradient_tol * jn * f) {
                sol.converged = true;
                break;
            }
            const Vector dc = Jr.colPivHouseholderQr().solve(-r);
            double t = 1.0;
            Vector trial = c + dc;
            Vector rt = Rn * affine_phi(mu, trial);
            while (rt.norm() > f && t > 1.0 / 1024.0) {
                t *= 0.5;
                trial = c + t * dc;
                rt = Rn * affine_phi(mu, trial);
            }
            const double ft = rt.norm();
            if (ft > f) {
                // no descent at roundoff level: accept if the gradient is small relative to its scale
                sol.converged = g <= 1e-6 * jn * f;
                break;
            }
            const double step = (t * dc).norm();
            c = std::move(trial);
            r = std::move(rt);
            f = ft;
            if (step <= opt.step_tol * (1.0 + c.norm())) {
                sol.converged = true;
                break;
            }
        }
        sol.coeffs = std::move(c);
        sol.residual = f;
        return sol;
    }

private:
    /// R * d phi / d c, exploiting that each column of d phi has O(N) nonzeros.
    void jacobian(double mu, const Vector& c, Eigen::Index p, Matrix& Jr) const {
        const auto N = static_cast<std::size_t>(c.size());
        Jr.setZero();
        for (std::size_t k = 0; k < N; ++k) {
            auto col = Jr.col(static_cast<Eigen::Index>(k));
            const std::size_t ok = block_offset(k);
            auto add = [&](std::size_t j, double v) {
                if (v != 0.0) col += v * R.col(static_cast<Eigen::Index>(j)).head(p);
            };
            add(ok, 1.0);
            add(ok + 1, mu);
            for (std::size_t m = 0; m < k; ++m) add(ok + 2 + m, c[static_cast<Eigen::Index>(m)]);
            add(ok + 2 + k, 2.0 * c[static_cast<Eigen::Index>(k)]);
            for (std::size_t n = k + 1; n < N; ++n) add(block_offset(n) + 2 + k, c[static_cast<Eigen::Index>(n)]);
        }
    }
};

/// Full-dimensional basis with the offline factorization state.
class ReducedBasis {
public:
    explicit ReducedBasis(const AffineSystem& sys) : sys_(&sys) {
        const auto n = static_cast<Eigen::Index>(sys.size());
        Vector v0 = Vector::Zero(2 * n);
        v0.tail(n) = -sys.rhs0;
        append_columns({v0});
    }

    [[nodiscard]] std::size_t size() const noexcept { return xi_.size(); }
    [[nodiscard]] const std::vector<Vector>& vectors() const noexcept { return xi_; }
    [[nodiscard]] const ReducedModel& model() const noexcept { return online_; }
    [[nodiscard]] ReducedModel& model() noexcept { return online_; }
    [[nodiscard]] const AffineSystem& system() const noexcept { return *sys_; }

    /// Lift coefficients (leading c.size() vectors) to a truth-space state.
    [[nodiscard]] TruthState lift(const Vector& c) const {
        const auto n = static_cast<Eigen::Index>(sys_->size());
        Vector x = Vector::Zero(2 * n);
        for (Eigen::Index k = 0; k < c.size(); ++k) x += c[k] * xi_[static_cast<std::size_t>(k)];
        return TruthState::from_stacked(x);
    }

    /// Coordinates of x in the basis (orthogonal projection).
    [[nodiscard]] Vector project(const Vector& x) const {
        Vector c(static_cast<Eigen::Index>(xi_.size()));
        for (std::size_t k = 0; k < xi_.size(); ++k) c[static_cast<Eigen::Index>(k)] = xi_[k].dot(x);
        return c;
    }

    /// Orthonormalize the snapshot (MGS, one reorthogonalization) and append
    /// it. Returns false without changing anything when the snapshot is
    /// numerically dependent (relative orthogonalized norm < dup_tol).
    bool add_snapshot(double mu, const TruthState& snapshot, double dup_tol = 1e-10) {
        Vector v = snapshot.stacked();
        const double norm0 = v.norm();
        if (!(norm0 > 0.0)) return false;
        for (int pass = 0; pass < 2; ++pass)
            for (const Vector& q : xi_) v -= q.dot(v) * q;
        const double nv = v.norm();
        if (nv < dup_tol * norm0) return false;
        v /= nv;
        xi_.push_back(std::move(v));
        append_columns(affine_block(xi_.size() - 1));

        online_.snapshot_mu.push_back(mu);
        const Vector x = snapshot.stacked();
        for (Vector& sc : online_.snapshot_coeffs) {
            sc.conservativeResize(static_cast<Eigen::Index>(xi_.size()));
            sc[sc.size() - 1] = 0.0;
        }
        const Vector c = project(x);
        online_.snapshot_coeffs.push_back(c);
        // earlier snapshots project to zero on the new direction only up to roundoff
        for (std::size_t s = 0; s + 1 < online_.snapshot_coeffs.size(); ++s)
            online_.snapshot_coeffs[s][static_cast<Eigen::Index>(xi_.size() - 1)] = 0.0;
        return true;
    }

    /// Drop the full-dimensional QR factor once offline work is finished.
    void release_factorization() {
        q_.clear();
        q_.shrink_to_fit();
    }

private:
    std::vector<Vector> affine_block(std::size_t n) const {
        const AffineSystem& s = *sys_;
        const auto N = static_cast<Eigen::Index>(s.size());
        const Vector& x = xi_[n];
        const Vector xg = x.head(N), xu = x.tail(N);
        const Vector dxu = s.Dx * xu;
        std::vector<Vector> cols;
        cols.reserve(n + 3);
        Vector b(2 * N);
        b.head(N) = -dxu - s.discount.cwiseProduct(xg);
        b.tail(N) = s.B * xu;
        cols.push_back(std::move(b));
        Vector e = Vector::Zero(2 * N);
        e.tail(N) = dxu;
        cols.push_back(std::move(e));
        for (std::size_t m = 0; m <= n; ++m) {
            const Vector& y = xi_[m];
            const Vector yg = y.head(N), yu = y.tail(N);
            Vector q = Vector::Zero(2 * N);
            if (m < n) {
                q.tail(N) = -yg.cwiseProduct(dxu) - xg.cwiseProduct(s.Dx * yu) -
                            s.discount.cwiseProduct(yg).cwiseProduct(xg);
            } else {
                q.tail(N) = -xg.cwiseProduct(dxu) - 0.5 * s.discount.cwiseProduct(xg).cwiseProduct(xg);
            }
            cols.push_back(std::move(q));
        }
        return cols;
    }

    /// Classical Gram-Schmidt with reorthogonalization against the stored Q.
    void append_columns(const std::vector<Vector>& cols) {
        const auto old_p = static_cast<Eigen::Index>(q_.size());
        const auto new_p = old_p + static_cast<Eigen::Index>(cols.size());
        Matrix& R = online_.R;
        R.conservativeResize(new_p, new_p);
        R.bottomRows(new_p - old_p).setZero();
        R.rightCols(new_p - old_p).setZero();
        for (const Vector& col : cols) {
            const auto j = static_cast<Eigen::Index>(q_.size());
            Vector v = col;
            const double n0 = v.norm();
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i < q_.size(); ++i) {
                    const double h = q_[i].dot(v);
                    R(static_cast<Eigen::Index>(i), j) += h;
                    v -= h * q_[i];
                }
            }
            const double nv = v.norm();
            if (nv > 1e-15 * n0 && nv > 0.0) {
                R(j, j) = nv;
                q_.push_back(v / nv);
            } else {
                R(j, j) = 0.0;
                q_.push_back(Vector::Zero(v.size()));
            }
        }
    }

    const AffineSystem* sys_;
    std::vector<Vector> xi_;
    std::vector<Vector> q_;
    ReducedModel online_;
};

}  // namespace hjbrb

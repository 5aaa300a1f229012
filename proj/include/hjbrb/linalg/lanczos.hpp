#pragma once

// Symmetric Lanczos with full reorthogonalization for the extreme
// eigenvalues of an implicitly applied symmetric operator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hjbrb/linalg/types.hpp"

namespace hjbrb::linalg {

struct LanczosOptions {
    double tol = 1e-10;          ///< Ritz residual relative to the spectral scale
    int max_iter = 400;          ///< Krylov dimension cap
    std::uint64_t seed = 20240817;
    bool want_min = true;
    bool want_max = true;
};

struct LanczosResult {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double residual_min = 0.0;  ///< Ritz residual norm of the lower end
    double residual_max = 0.0;
    int iterations = 0;
    bool converged = false;
};

template <class Op>
[[nodiscard]] LanczosResult lanczos_extremes(Op&& op, Eigen::Index n, const LanczosOptions& opt = {}) {
    LanczosResult res;
    const int kmax = static_cast<int>(std::min<Eigen::Index>(n, opt.max_iter));
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector q(n);
    for (Eigen::Index i = 0; i < n; ++i) q[i] = normal(rng);
    q.normalize();

    std::vector<Vector> basis;
    std::vector<double> alpha, beta;
    basis.reserve(static_cast<std::size_t>(kmax));
    Vector w;
    for (int k = 0; k < kmax; ++k) {
        basis.push_back(q);
        w = op(q);
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= a * q;
        if (k > 0) w -= beta.back() * basis[basis.size() - 2];
        // Gram-Schmidt against all previous vectors, repeated once on cancellation
        double b = w.norm();
        for (int pass = 0; pass < 2; ++pass) {
            const double before = b;
            for (const Vector& v : basis) w -= v.dot(w) * v;
            b = w.norm();
            if (b > 0.7071 * before) break;
        }

        const int m = k + 1;
        const bool check = m <= 40 || m % 4 == 0 || m == kmax;
        double scale = 0.0;
        for (double v : alpha) scale = std::max(scale, std::abs(v));
        const bool invariant = b <= 1e-14 * std::max(scale, 1e-300) || m == n;
        if (check || invariant) {
            Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
            Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1))
                                        : Eigen::VectorXd();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            const auto& ev = es.eigenvalues();
            const auto& V = es.eigenvectors();
            res.lambda_min = ev[0];
            res.lambda_max = ev[m - 1];
            res.residual_min = invariant ? 0.0 : b * std::abs(V(m - 1, 0));
            res.residual_max = invariant ? 0.0 : b * std::abs(V(m - 1, m - 1));
            res.iterations = m;
            const double s = std::max(std::abs(res.lambda_min), std::abs(res.lambda_max));
            const bool ok_min = !opt.want_min || res.residual_min <= opt.tol * s;
            const bool ok_max = !opt.want_max || res.residual_max <= opt.tol * s;
            if ((ok_min && ok_max) || invariant) {
                res.converged = true;
                return res;
            }
        }
        beta.push_back(b);
        q = w / b;
    }
    return res;
}

}  // namespace hjbrb::linalg

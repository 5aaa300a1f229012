#pragma once

// Tridiagonal LU with partial pivoting (the dgttrf/dgttrs scheme), with
// solves against A and A^T. Level blocks of the space-time operator are not
// guaranteed diagonally dominant away from the truth solution, so pivoting
// is kept.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace hjbrb::linalg {

class TridiagonalLU {
public:
    TridiagonalLU() = default;

    /// lower[i] = A(i+1, i), diag[i] = A(i, i), upper[i] = A(i, i+1).
    TridiagonalLU(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
        : dl_(std::move(lower)), d_(std::move(diag)), du_(std::move(upper)) {
        factor();
    }

    [[nodiscard]] std::size_t size() const noexcept { return d_.size(); }
    [[nodiscard]] bool singular() const noexcept { return singular_; }

    /// In-place solve A x = b.
    void solve(std::span<double> b) const {
        const std::size_t n = d_.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (ipiv_[i] == i) {
                b[i + 1] -= dl_[i] * b[i];
            } else {
                const double temp = b[i] - dl_[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            }
        }
        b[n - 1] /= d_[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
        for (std::size_t ii = n; ii-- > 2;) {
            const std::size_t i = ii - 2;
            b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
        }
    }

    /// In-place solve A^T x = b.
    void solve_transpose(std::span<double> b) const {
        const std::size_t n = d_.size();
        b[0] /= d_[0];
        if (n > 1) b[1] = (b[1] - du_[0] * b[0]) / d_[1];
        for (std::size_t i = 2; i < n; ++i) {
            b[i] = (b[i] - du_[i - 1] * b[i - 1] - du2_[i - 2] * b[i - 2]) / d_[i];
        }
        for (std::size_t ii = n - 1; ii-- > 0;) {
            const std::size_t i = ii;
            const std::size_t ip = ipiv_[i];
            const double temp = b[i] - dl_[i] * b[i + 1];
            b[i] = b[ip];
            b[ip] = temp;
        }
    }

private:
    void factor() {
        const std::size_t n = d_.size();
        ipiv_.resize(n);
        du2_.assign(n > 2 ? n - 2 : 0, 0.0);
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ipiv_[i] = i;
            scale = std::max(scale, std::abs(d_[i]));
            if (i + 1 < n) scale = std::max({scale, std::abs(dl_[i]), std::abs(du_[i])});
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d_[i]) >= std::abs(dl_[i])) {
                if (d_[i] != 0.0) {
                    const double fact = dl_[i] / d_[i];
                    dl_[i] = fact;
                    d_[i + 1] -= fact * du_[i];
                }
            } else {
                const double fact = d_[i] / dl_[i];
                d_[i] = dl_[i];
                dl_[i] = fact;
                const double temp = du_[i];
                du_[i] = d_[i + 1];
                d_[i + 1] = temp - fact * d_[i + 1];
                if (i + 2 < n) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -fact * du_[i + 1];
                }
                ipiv_[i] = i + 1;
            }
        }
        const double tiny = scale * 1e-14;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(std::abs(d_[i]) > tiny)) singular_ = true;
        }
    }

    std::vector<double> dl_, d_, du_, du2_;
    std::vector<std::size_t> ipiv_;
    bool singular_ = false;
};

}  // namespace hjbrb::linalg

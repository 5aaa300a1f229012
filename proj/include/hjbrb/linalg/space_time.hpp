#pragma once

// O(N) solver for S = B + diag(w) Dx: block upper bidiagonal in time with
// tridiagonal diagonal blocks and -coupling * I above the diagonal.

#include <cstddef>
#include <span>
#include <vector>

#include "hjbrb/assembly.hpp"
#include "hjbrb/error.hpp"
#include "hjbrb/linalg/tridiagonal.hpp"
#include "hjbrb/linalg/types.hpp"

namespace hjbrb::linalg {

class SpaceTimeSolver {
public:
    SpaceTimeSolver(const AffineSystem& sys, const Vector& w)
        : nx_(sys.grid.nx), levels_(sys.grid.levels()), coupling_(sys.coupling) {
        if (static_cast<std::size_t>(w.size()) != sys.size())
            throw NumericalError("space-time solver: weight length mismatch");
        const RowStencil& b = sys.b_level;
        const RowStencil& d = sys.dx_level;
        blocks_.reserve(levels_);
        std::vector<double> lo(nx_ - 1), di(nx_), up(nx_ - 1);
        for (std::size_t k = 0; k < levels_; ++k) {
            const double* wk = w.data() + k * nx_;
            for (std::size_t j = 0; j < nx_; ++j) {
                di[j] = b.diag[j] + wk[j] * d.diag[j];
                if (j > 0) lo[j - 1] = b.lower[j] + wk[j] * d.lower[j];
                if (j + 1 < nx_) up[j] = b.upper[j] + wk[j] * d.upper[j];
            }
            blocks_.emplace_back(lo, di, up);
            if (blocks_.back().singular()) singular_ = true;
        }
    }

    [[nodiscard]] bool singular() const noexcept { return singular_; }

    /// Solve S x = b (backward sweep in time).
    [[nodiscard]] Vector solve(const Vector& rhs) const {
        check();
        Vector x = rhs;
        for (std::size_t kk = levels_; kk-- > 0;) {
            std::span<double> xk(x.data() + kk * nx_, nx_);
            if (kk + 1 < levels_) {
                const double* next = x.data() + (kk + 1) * nx_;
                for (std::size_t j = 0; j < nx_; ++j) xk[j] += coupling_ * next[j];
            }
            blocks_[kk].solve(xk);
        }
        return x;
    }

    /// Solve S^T x = b (forward sweep in time).
    [[nodiscard]] Vector solve_transpose(const Vector& rhs) const {
        check();
        Vector x = rhs;
        for (std::size_t k = 0; k < levels_; ++k) {
            std::span<double> xk(x.data() + k * nx_, nx_);
            if (k > 0) {
                const double* prev = x.data() + (k - 1) * nx_;
                for (std::size_t j = 0; j < nx_; ++j) xk[j] += coupling_ * prev[j];
            }
            blocks_[k].solve_transpose(xk);
        }
        return x;
    }

private:
    void check() const {
        if (singular_) throw NumericalError("space-time solver: singular level block");
    }

    std::size_t nx_;
    std::size_t levels_;
    double coupling_;
    std::vector<TridiagonalLU> blocks_;
    bool singular_ = false;
};

}  // namespace hjbrb::linalg

#pragma once

// Dense two-phase simplex (Bland's rule) for
//   min c.z  subject to  lo <= z <= hi,  A z >= b.
// Sized for the small SCM programs: tens of variables and rows.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "hjbrb/linalg/types.hpp"

namespace hjbrb::linalg {

enum class LpStatus { optimal, infeasible };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double value = std::numeric_limits<double>::quiet_NaN();
    Vector z;
};

namespace detail {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (n_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, n_); }
    double& obj(std::size_t c) { return at(m_, c); }
    std::vector<std::size_t>& basis() { return basis_; }
    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }

    void pivot(std::size_t r, std::size_t c) {
        const double p = at(r, c);
        for (std::size_t j = 0; j <= n_; ++j) at(r, j) /= p;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            const double f = at(i, c);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
        }
        basis_[r] = c;
    }

    /// Minimize the objective row over columns with allowed[c]; false if unbounded.
    bool optimize(const std::vector<bool>& allowed, double eps) {
        for (std::size_t guard = 0; guard < 50000; ++guard) {
            std::size_t enter = n_;
            for (std::size_t c = 0; c < n_; ++c)
                if (allowed[c] && obj(c) < -eps) { enter = c; break; }
            if (enter == n_) return true;
            std::size_t leave = m_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < m_; ++r) {
                const double a = at(r, enter);
                if (a > eps) {
                    const double ratio = at(r, n_) / a;
                    if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && leave < m_ && basis_[r] < basis_[leave])) {
                        best = ratio;
                        leave = r;
                    }
                }
            }
            if (leave == m_) return false;
            pivot(leave, enter);
        }
        return false;
    }

private:
    std::size_t m_, n_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
};

}  // namespace detail

[[nodiscard]] inline LpResult solve_box_lp(const Vector& c, const Vector& lo, const Vector& hi,
                                           const Matrix& A, const Vector& b) {
    const auto nv = static_cast<std::size_t>(c.size());
    const auto nc = static_cast<std::size_t>(A.rows());
    LpResult out;
    for (std::size_t i = 0; i < nv; ++i)
        if (lo[static_cast<Eigen::Index>(i)] > hi[static_cast<Eigen::Index>(i)]) return out;

    // y = z - lo in [0, hi - lo]; rows: y_i + s_i = width_i, then a.y - t = b - a.lo.
    const Vector width = hi - lo;
    const Vector shifted = nc > 0 ? Vector(b - A * lo) : Vector();
    std::vector<bool> needs_art(nc, false);
    std::size_t n_art = 0;
    for (std::size_t k = 0; k < nc; ++k)
        if (shifted[static_cast<Eigen::Index>(k)] > 0.0) { needs_art[k] = true; ++n_art; }

    const std::size_t col_y = 0, col_s = nv, col_t = 2 * nv, col_a = 2 * nv + nc;
    const std::size_t ncols = col_a + n_art;
    const std::size_t nrows = nv + nc;
    detail::Tableau T(nrows, ncols);
    for (std::size_t i = 0; i < nv; ++i) {
        T.at(i, col_y + i) = 1.0;
        T.at(i, col_s + i) = 1.0;
        T.rhs(i) = width[static_cast<Eigen::Index>(i)];
        T.basis()[i] = col_s + i;
    }
    std::size_t a_next = col_a;
    for (std::size_t k = 0; k < nc; ++k) {
        const std::size_t r = nv + k;
        const double sgn = needs_art[k] ? 1.0 : -1.0;
        for (std::size_t i = 0; i < nv; ++i) T.at(r, col_y + i) = sgn * A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
        T.at(r, col_t + k) = -sgn;
        T.rhs(r) = sgn * shifted[static_cast<Eigen::Index>(k)];
        if (needs_art[k]) {
            T.at(r, a_next) = 1.0;
            T.basis()[r] = a_next++;
        } else {
            T.basis()[r] = col_t + k;
        }
    }

    double scale = 1.0;
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t j = 0; j <= ncols; ++j) scale = std::max(scale, std::abs(T.at(r, j)));
    const double eps = 1e-12 * scale;

    std::vector<bool> allowed(ncols, true);
    if (n_art > 0) {
        // phase one: minimize the sum of artificials
        for (std::size_t j = 0; j <= ncols; ++j) T.obj(j) = 0.0;
        for (std::size_t r = 0; r < nrows; ++r) {
            if (T.basis()[r] >= col_a)
                for (std::size_t j = 0; j <= ncols; ++j)
                    if (j < col_a || j == ncols) T.obj(j) -= T.at(r, j);
        }
        T.optimize(allowed, eps);
        if (-T.obj(ncols) > 1e-9 * scale) return out;
        // drive remaining artificials out of the basis
        for (std::size_t r = 0; r < nrows; ++r) {
            if (T.basis()[r] < col_a) continue;
            for (std::size_t j = 0; j < col_a; ++j)
                if (std::abs(T.at(r, j)) > eps) { T.pivot(r, j); break; }
        }
        for (std::size_t j = col_a; j < ncols; ++j) allowed[j] = false;
    }

    for (std::size_t j = 0; j <= ncols; ++j) T.obj(j) = 0.0;
    for (std::size_t i = 0; i < nv; ++i) T.obj(col_y + i) = c[static_cast<Eigen::Index>(i)];
    for (std::size_t r = 0; r < nrows; ++r) {
        const std::size_t bc = T.basis()[r];
        const double f = T.obj(bc);
        if (f == 0.0) continue;
        for (std::size_t j = 0; j <= ncols; ++j) T.obj(j) -= f * T.at(r, j);
    }
    if (!T.optimize(allowed, 1e-13 * std::max(1.0, c.cwiseAbs().maxCoeff()))) return out;

    Vector y = Vector::Zero(static_cast<Eigen::Index>(nv));
    for (std::size_t r = 0; r < nrows; ++r)
        if (T.basis()[r] < nv) y[static_cast<Eigen::Index>(T.basis()[r])] = T.rhs(r);
    out.z = lo + y.cwiseMax(0.0).cwiseMin(width);
    out.value = c.dot(out.z);
    out.status = LpStatus::optimal;
    return out;
}

}  // namespace hjbrb::linalg

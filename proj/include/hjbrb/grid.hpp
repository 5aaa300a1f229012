#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "hjbrb/error.hpp"
#include "hjbrb/model.hpp"

namespace hjbrb {

/// Regular space-time grid. Unknowns live on time levels 0 .. nt-2; level
/// nt-1 is t = T and carries the terminal data. Flat index = level * nx + j.
struct Grid {
    std::size_t nx = 0;
    std::size_t nt = 0;
    double dx = 0.0;
    double dt = 0.0;
    double x_lo = 0.0;
    double T = 0.0;

    [[nodiscard]] std::size_t levels() const noexcept { return nt - 1; }
    [[nodiscard]] std::size_t size() const noexcept { return nx * (nt - 1); }
    [[nodiscard]] std::size_t index(std::size_t level, std::size_t j) const noexcept {
        return level * nx + j;
    }
    [[nodiscard]] std::size_t level_of(std::size_t i) const noexcept { return i / nx; }
    [[nodiscard]] std::size_t space_of(std::size_t i) const noexcept { return i % nx; }
    [[nodiscard]] double t(std::size_t level) const noexcept { return static_cast<double>(level) * dt; }
    [[nodiscard]] double x(std::size_t j) const noexcept { return x_lo + static_cast<double>(j) * dx; }
};

namespace detail {

inline std::size_t even_division(double length, double step, const char* axis) {
    if (!(step > 0.0)) throw ConfigError(std::string("grid: ") + axis + " step must be positive");
    const double ratio = length / step;
    const double cells = std::round(ratio);
    if (cells < 1.0 || std::abs(cells * step - length) > 1e-12 * std::abs(length)) {
        throw ConfigError(std::string("grid: ") + axis + " step " + std::to_string(step) +
                          " does not divide the " + axis + " extent " + std::to_string(length));
    }
    return static_cast<std::size_t>(cells);
}

}  // namespace detail

[[nodiscard]] inline Grid build_grid(const ModelSpec& model, double dx, double dt) {
    model.validate();
    const double width = model.domain_hi - model.domain_lo;
    const std::size_t cx = detail::even_division(width, dx, "space");
    const std::size_t ct = detail::even_division(model.T, dt, "time");
    Grid g;
    g.nx = cx + 1;
    g.nt = ct + 1;
    g.dx = width / static_cast<double>(cx);
    g.dt = model.T / static_cast<double>(ct);
    g.x_lo = model.domain_lo;
    g.T = model.T;
    if (g.nx < 3) throw ConfigError("grid: need at least 3 spatial points");
    return g;
}

}  // namespace hjbrb

#pragma once

#include <stdexcept>
#include <string>

namespace hjbrb {

/// Invalid user input: grid spacing, parameter range, config keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative method ran out of iterations. Carries the last residual.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double last_residual, int iterations)
        : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

    [[nodiscard]] double last_residual() const noexcept { return last_residual_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

/// Singular factorization, eigen-solver breakdown, infeasible LP.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Object used before it was set up (empty anchor set, empty basis).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Persisted offline data that is unreadable or does not match the config.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hjbrb

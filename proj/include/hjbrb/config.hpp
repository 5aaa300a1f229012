#pragma once

// Run configuration: a JSON tree with blocks model, grid, scm, rb, sweep,
// output and a seed. Every block and key is optional; unknown keys are errors.

#include <cstdint>
#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjbrb/error.hpp"
#include "hjbrb/model.hpp"

namespace hjbrb {

struct SampleSpec {
    std::size_t count = 0;
    std::string sampling = "equispaced";  ///< equispaced | random
    std::vector<double> values;            ///< explicit list overrides count
};

struct RunConfig {
    ModelSpec model;
    double dx = 1.5;
    double dt = 1.0 / 109.0;
    double tol = 1e-10;
    int max_iter = 100;

    std::size_t anchor_sample_size = 64;
    int scm_constraint_count = 8;
    double online_threshold = 0.5;

    SampleSpec train{128, "equispaced", {}};
    double eps_tol = 1e-2;
    std::size_t max_basis = 30;

    SampleSpec sweep{101, "equispaced", {}};
    int figure_N = 0;  ///< basis size for the fixed-N figures; 0 = full basis

    std::string output_dir = "out";
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& block, std::set<std::string> allowed) {
    if (!j.is_object()) throw ConfigError("config: block '" + block + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("config: unknown key '" + k + "' in block '" + block + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& block) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for '" + block + "." + key + "'");
    }
}

inline void read_pair(const nlohmann::json& j, const char* key, double& lo, double& hi, const std::string& block) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError("config: '" + block + "." + key + "' must be a two-number array");
    lo = v[0].get<double>();
    hi = v[1].get<double>();
}

inline void read_sample(const nlohmann::json& j, const char* count_key, const char* list_key, SampleSpec& s,
                        const std::string& block) {
    read(j, count_key, s.count, block);
    read(j, "sampling", s.sampling, block);
    read(j, list_key, s.values, block);
    if (s.sampling != "equispaced" && s.sampling != "random")
        throw ConfigError("config: " + block + ".sampling must be 'equispaced' or 'random'");
}

}  // namespace detail

[[nodiscard]] inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig c;
    detail::check_keys(j, "root", {"model", "grid", "scm", "rb", "sweep", "output", "seed"});
    if (j.contains("model")) {
        const auto& m = j["model"];
        detail::check_keys(m, "model", {"T", "domain", "mu_range", "rate", "g_left", "g_right"});
        detail::read(m, "T", c.model.T, "model");
        detail::read_pair(m, "domain", c.model.domain_lo, c.model.domain_hi, "model");
        detail::read_pair(m, "mu_range", c.model.mu_lo, c.model.mu_hi, "model");
        detail::read(m, "rate", c.model.rate, "model");
        detail::read(m, "g_left", c.model.g_left, "model");
        detail::read(m, "g_right", c.model.g_right, "model");
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        detail::check_keys(g, "grid", {"dx", "dt", "time_steps", "tol", "max_iter"});
        detail::read(g, "dx", c.dx, "grid");
        detail::read(g, "dt", c.dt, "grid");
        if (g.contains("time_steps")) {
            int steps = 0;
            detail::read(g, "time_steps", steps, "grid");
            if (steps < 1) throw ConfigError("config: grid.time_steps must be >= 1");
            c.dt = c.model.T / steps;
        }
        detail::read(g, "tol", c.tol, "grid");
        detail::read(g, "max_iter", c.max_iter, "grid");
    }
    if (j.contains("scm")) {
        const auto& s = j["scm"];
        detail::check_keys(s, "scm", {"anchor_sample_size", "scm_constraint_count", "online_threshold"});
        detail::read(s, "anchor_sample_size", c.anchor_sample_size, "scm");
        detail::read(s, "scm_constraint_count", c.scm_constraint_count, "scm");
        detail::read(s, "online_threshold", c.online_threshold, "scm");
    }
    if (j.contains("rb")) {
        const auto& r = j["rb"];
        detail::check_keys(r, "rb", {"train_size", "sampling", "train", "eps_tol", "max_basis"});
        detail::read_sample(r, "train_size", "train", c.train, "rb");
        detail::read(r, "eps_tol", c.eps_tol, "rb");
        detail::read(r, "max_basis", c.max_basis, "rb");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        detail::check_keys(s, "sweep", {"count", "sampling", "mu", "N"});
        detail::read_sample(s, "count", "mu", c.sweep, "sweep");
        detail::read(s, "N", c.figure_N, "sweep");
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        detail::check_keys(o, "output", {"dir"});
        detail::read(o, "dir", c.output_dir, "output");
    }
    detail::read(j, "seed", c.seed, "root");

    c.model.validate();
    c.model.check_compatibility();
    if (!(c.dx > 0.0) || !(c.dt > 0.0)) throw ConfigError("config: grid spacings must be positive");
    if (!(c.tol > 0.0) || c.max_iter < 1) throw ConfigError("config: grid.tol > 0 and grid.max_iter >= 1 required");
    if (c.anchor_sample_size < 1) throw ConfigError("config: scm.anchor_sample_size must be >= 1");
    if (c.scm_constraint_count < 0) throw ConfigError("config: scm.scm_constraint_count must be >= 0");
    if (!(c.online_threshold > 0.0 && c.online_threshold < 1.0))
        throw ConfigError("config: scm.online_threshold must lie in (0, 1)");
    if (!(c.eps_tol > 0.0)) throw ConfigError("config: rb.eps_tol must be positive");
    if (c.max_basis < 1) throw ConfigError("config: rb.max_basis must be >= 1");
    if (c.train.values.empty() && c.train.count < 1) throw ConfigError("config: rb.train_size must be >= 1");
    if (c.sweep.values.empty() && c.sweep.count < 1) throw ConfigError("config: sweep.count must be >= 1");
    for (const auto* s : {&c.train, &c.sweep})
        for (double mu : s->values)
            if (!c.model.contains_mu(mu)) throw ConfigError("config: sample parameter outside mu_range");
    return c;
}

[[nodiscard]] inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    return parse_config(j);
}

/// Equispaced points include both endpoints; random points are uniform and
/// sorted, drawn from a generator seeded by (seed, stream).
[[nodiscard]] inline std::vector<double> parameter_sample(const ModelSpec& m, const SampleSpec& s, std::uint64_t seed,
                                                          std::uint64_t stream) {
    if (!s.values.empty()) return s.values;
    std::vector<double> out(s.count);
    if (s.sampling == "equispaced") {
        for (std::size_t i = 0; i < s.count; ++i)
            out[i] = s.count == 1 ? 0.5 * (m.mu_lo + m.mu_hi)
                                  : m.mu_lo + (m.mu_hi - m.mu_lo) * static_cast<double>(i) /
                                                  static_cast<double>(s.count - 1);
        if (s.count > 1) out.back() = m.mu_hi;
        return out;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::mt19937_64 rng(seq);
    for (double& v : out) {
        // explicit mapping keeps the stream identical across standard libraries
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = m.mu_lo + (m.mu_hi - m.mu_lo) * u;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace hjbrb

#pragma once

// Persistence of offline data: a JSON manifest plus little-endian float64
// arrays, one file per array.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjbrb/error.hpp"
#include "hjbrb/grid.hpp"
#include "hjbrb/model.hpp"
#include "hjbrb/rb.hpp"

namespace hjbrb {

inline constexpr int kOfflineFormatVersion = 1;

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Fingerprint of everything that determines the truth discretization.
[[nodiscard]] inline std::string discretization_fingerprint(const ModelSpec& m, const Grid& g, double tol) {
    std::ostringstream os;
    os.precision(17);
    os << "T=" << m.T << ";lo=" << m.domain_lo << ";hi=" << m.domain_hi << ";mu_lo=" << m.mu_lo
       << ";mu_hi=" << m.mu_hi << ";rate=" << m.rate << ";gl=" << m.g_left << ";gr=" << m.g_right
       << ";QL=" << m.Q_L << ";Qf=" << m.Q_f << ";nx=" << g.nx << ";nt=" << g.nt << ";tol=" << tol;
    return hex64(fnv1a(os.str()));
}

namespace detail {

inline void write_f64(const std::filesystem::path& p, const std::vector<double>& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + p.string());
    for (double v : data) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    if (!out) throw ArtifactError("write failed: " + p.string());
}

inline std::vector<double> read_f64(const std::filesystem::path& p, std::size_t expected) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ArtifactError("cannot read " + p.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected * 8)
        throw ArtifactError(p.string() + ": expected " + std::to_string(expected) + " values, found " +
                            std::to_string(size / 8));
    in.seekg(0);
    std::vector<double> data(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
        data[i] = std::bit_cast<double>(bits);
    }
    if (!in) throw ArtifactError("read failed: " + p.string());
    return data;
}

inline void append(std::vector<double>& out, const Vector& v, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(i < v.size() ? v[i] : 0.0);
}

inline Vector take(const std::vector<double>& in, std::size_t& pos, Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = in[pos++];
    return v;
}

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline void save_offline(const std::filesystem::path& dir, const OfflineData& off) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ArtifactError("cannot create " + dir.string() + ": " + ec.message());

    const auto N = static_cast<Eigen::Index>(off.N());
    const auto P = off.reduced.R.rows();
    const std::size_t R = off.anchors.R();
    const Eigen::Index truth = off.basis.empty() ? 0 : off.basis.front().size();

    nlohmann::json j;
    j["format_version"] = kOfflineFormatVersion;
    j["fingerprint"] = off.fingerprint;
    j["dims"] = {{"N", N}, {"P", P}, {"R", R}, {"truth_dim", truth}, {"stage1_N", off.stage1_N},
                 {"anchor_train", off.anchor_train.size()}, {"anchor_iterations", off.anchor_history.size()}};
    j["status"] = off.status == GreedyStatus::converged ? "converged" : "exhausted";
    j["diagnostic"] = off.diagnostic;
    const LipschitzConstants& L = off.lipschitz;
    j["lipschitz"] = {{"rho_L0", L.rho_L0}, {"rho_L1", L.rho_L1}, {"rho_L2", L.rho_L2},
                      {"rho_f1", L.rho_f1}, {"rho_f2", L.rho_f2}, {"rho", L.rho}};
    j["snapshot_mu"] = off.reduced.snapshot_mu;
    j["anchor_train"] = off.anchor_train;
    j["scm_constraint_count"] = off.scm.constraint_count;
    nlohmann::json anchors = nlohmann::json::array();
    for (std::size_t r = 0; r < R; ++r)
        anchors.push_back({{"mu", off.anchors.anchors[r].mu},
                           {"beta_offline", off.anchors.anchors[r].beta_offline},
                           {"constraints", off.scm.per_anchor[r].constraints.size()}});
    j["anchors"] = anchors;
    nlohmann::json hist = nlohmann::json::array();
    for (const GreedyRecord& h : off.history)
        hist.push_back({{"N", h.N}, {"stage", h.stage}, {"mu_selected", detail::number_or_null(h.mu_selected)},
                        {"max_tau", detail::number_or_null(h.max_tau)},
                        {"max_delta", detail::number_or_null(h.max_delta)}});
    j["history"] = hist;

    std::vector<double> buf;
    buf.assign(off.reduced.R.data(), off.reduced.R.data() + off.reduced.R.size());
    detail::write_f64(dir / "R.bin", buf);

    buf.clear();
    for (const Vector& c : off.reduced.snapshot_coeffs) detail::append(buf, c, N);
    detail::write_f64(dir / "snapshot_coeffs.bin", buf);

    buf.clear();
    for (const Vector& v : off.basis) detail::append(buf, v, truth);
    detail::write_f64(dir / "basis.bin", buf);

    buf.clear();
    for (std::size_t r = 0; r < R; ++r) {
        const AnchorScm& s = off.scm.per_anchor[r];
        detail::append(buf, off.anchors.anchors[r].coeffs, N);
        for (Eigen::Index n = 0; n < N; ++n) {
            buf.push_back(s.box_gamma[static_cast<std::size_t>(n)][0]);
            buf.push_back(s.box_gamma[static_cast<std::size_t>(n)][1]);
        }
        for (Eigen::Index n = 0; n < N; ++n) {
            buf.push_back(s.box_cost[static_cast<std::size_t>(n)][0]);
            buf.push_back(s.box_cost[static_cast<std::size_t>(n)][1]);
        }
        buf.push_back(s.box_drift[0]);
        buf.push_back(s.box_drift[1]);
        for (const ScmConstraint& c : s.constraints) {
            buf.push_back(c.mu);
            buf.push_back(c.value);
            detail::append(buf, c.coeffs, N);
        }
    }
    detail::write_f64(dir / "scm.bin", buf);

    buf.clear();
    for (const auto& row : off.anchor_history) buf.insert(buf.end(), row.begin(), row.end());
    detail::write_f64(dir / "anchor_history.bin", buf);

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw ArtifactError("cannot write manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

/// Loads offline data; throws ArtifactError on malformed files or (when
/// expected_fingerprint is nonempty) a fingerprint mismatch.
[[nodiscard]] inline OfflineData load_offline(const std::filesystem::path& dir, const std::string& expected_fingerprint,
                                              bool load_basis = true) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ArtifactError("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ArtifactError(std::string("corrupted manifest: ") + e.what());
    }
    OfflineData off;
    try {
        if (j.at("format_version").get<int>() != kOfflineFormatVersion)
            throw ArtifactError("unsupported offline format version " + j.at("format_version").dump());
        off.fingerprint = j.at("fingerprint").get<std::string>();
        if (!expected_fingerprint.empty() && off.fingerprint != expected_fingerprint)
            throw ArtifactError("fingerprint mismatch: offline data " + off.fingerprint + ", configuration " +
                                expected_fingerprint);
        const auto& d = j.at("dims");
        const auto N = d.at("N").get<Eigen::Index>();
        const auto P = d.at("P").get<Eigen::Index>();
        const auto R = d.at("R").get<std::size_t>();
        const auto truth = d.at("truth_dim").get<Eigen::Index>();
        off.stage1_N = d.at("stage1_N").get<std::size_t>();
        const auto n_train = d.at("anchor_train").get<std::size_t>();
        const auto n_iter = d.at("anchor_iterations").get<std::size_t>();
        if (P != static_cast<Eigen::Index>(affine_columns(static_cast<std::size_t>(N))))
            throw ArtifactError("manifest dimensions inconsistent (N, P)");
        off.status = j.at("status").get<std::string>() == "converged" ? GreedyStatus::converged
                                                                       : GreedyStatus::exhausted;
        off.diagnostic = j.at("diagnostic").get<std::string>();
        const auto& L = j.at("lipschitz");
        off.lipschitz = {L.at("rho_L0").get<double>(), L.at("rho_L1").get<double>(), L.at("rho_L2").get<double>(),
                         L.at("rho_f1").get<double>(), L.at("rho_f2").get<double>(), L.at("rho").get<double>()};
        off.reduced.snapshot_mu = j.at("snapshot_mu").get<std::vector<double>>();
        off.anchor_train = j.at("anchor_train").get<std::vector<double>>();
        off.scm.constraint_count = j.at("scm_constraint_count").get<int>();
        if (off.reduced.snapshot_mu.size() != static_cast<std::size_t>(N) || off.anchor_train.size() != n_train)
            throw ArtifactError("manifest arrays inconsistent with dims");
        for (const auto& h : j.at("history"))
            off.history.push_back({h.at("N").get<std::size_t>(), h.at("stage").get<int>(),
                                   detail::number_or_nan(h.at("mu_selected")), detail::number_or_nan(h.at("max_tau")),
                                   detail::number_or_nan(h.at("max_delta"))});

        const std::vector<double> rbuf = detail::read_f64(dir / "R.bin", static_cast<std::size_t>(P * P));
        off.reduced.R = Eigen::Map<const Matrix>(rbuf.data(), P, P);

        const std::vector<double> sbuf = detail::read_f64(dir / "snapshot_coeffs.bin", static_cast<std::size_t>(N * N));
        std::size_t pos = 0;
        for (Eigen::Index n = 0; n < N; ++n) off.reduced.snapshot_coeffs.push_back(detail::take(sbuf, pos, N));

        if (load_basis) {
            const std::vector<double> bbuf = detail::read_f64(dir / "basis.bin", static_cast<std::size_t>(N * truth));
            pos = 0;
            for (Eigen::Index n = 0; n < N; ++n) off.basis.push_back(detail::take(bbuf, pos, truth));
        }

        std::size_t scm_len = 0;
        std::vector<std::size_t> counts;
        for (const auto& a : j.at("anchors")) {
            counts.push_back(a.at("constraints").get<std::size_t>());
            scm_len += static_cast<std::size_t>(N + 4 * N + 2) + counts.back() * static_cast<std::size_t>(N + 2);
        }
        if (counts.size() != R) throw ArtifactError("manifest anchor count inconsistent");
        const std::vector<double> cbuf = detail::read_f64(dir / "scm.bin", scm_len);
        pos = 0;
        std::size_t r = 0;
        for (const auto& a : j.at("anchors")) {
            AnchorPoint ap;
            ap.mu = a.at("mu").get<double>();
            ap.beta_offline = a.at("beta_offline").get<double>();
            ap.coeffs = detail::take(cbuf, pos, N);
            AnchorScm s;
            for (Eigen::Index n = 0; n < N; ++n) {
                s.box_gamma.push_back({cbuf[pos], cbuf[pos + 1]});
                pos += 2;
            }
            for (Eigen::Index n = 0; n < N; ++n) {
                s.box_cost.push_back({cbuf[pos], cbuf[pos + 1]});
                pos += 2;
            }
            s.box_drift = {cbuf[pos], cbuf[pos + 1]};
            pos += 2;
            for (std::size_t k = 0; k < counts[r]; ++k) {
                ScmConstraint c;
                c.mu = cbuf[pos++];
                c.value = cbuf[pos++];
                c.coeffs = detail::take(cbuf, pos, N);
                s.constraints.push_back(std::move(c));
            }
            off.anchors.anchors.push_back(std::move(ap));
            off.scm.per_anchor.push_back(std::move(s));
            ++r;
        }

        const std::vector<double> hbuf = detail::read_f64(dir / "anchor_history.bin", n_iter * n_train);
        for (std::size_t it = 0; it < n_iter; ++it)
            off.anchor_history.emplace_back(hbuf.begin() + static_cast<std::ptrdiff_t>(it * n_train),
                                            hbuf.begin() + static_cast<std::ptrdiff_t>((it + 1) * n_train));
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError(std::string("corrupted manifest: ") + e.what());
    }
    return off;
}

}  // namespace hjbrb

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rb_fixture.hpp"
#include "hjbrb/config.hpp"
#include "hjbrb/io.hpp"

using namespace hjbrb;
using namespace hjbrb::oracle;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hjbrb_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

OfflineData small_offline(const AffineSystem& sys) {
    GreedyOptions o;
    o.train = equispaced(0.0, 100.0, 9);
    o.anchor_train = equispaced(0.0, 100.0, 5);
    o.eps_tol = 1e-3;
    OfflineData off = greedy_offline(sys, o);
    off.fingerprint = discretization_fingerprint(sys.model, sys.grid, 1e-10);
    return off;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(HJBRB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsMatchTheReferenceSetup) {
    const RunConfig c = parse_config(nlohmann::json::object());
    EXPECT_EQ(c.model.T, 1.0);
    EXPECT_EQ(c.model.domain_lo, -150.0);
    EXPECT_EQ(c.model.mu_hi, 100.0);
    EXPECT_EQ(c.dx, 1.5);
    EXPECT_DOUBLE_EQ(c.dt, 1.0 / 109.0);
    EXPECT_EQ(c.tol, 1e-10);
    EXPECT_EQ(c.max_iter, 100);
    EXPECT_EQ(c.anchor_sample_size, 64u);
    EXPECT_EQ(c.scm_constraint_count, 8);
    EXPECT_EQ(c.online_threshold, 0.5);
    EXPECT_EQ(c.train.count, 128u);
    EXPECT_EQ(c.eps_tol, 1e-2);
    EXPECT_EQ(c.sweep.count, 101u);
}

TEST(Config, ParsesBlocks) {
    const auto j = nlohmann::json::parse(R"({
        "model": {"T": 1, "domain": [-150, 150], "mu_range": [0, 50], "rate": 0.05, "g_left": 0, "g_right": 1},
        "grid": {"dx": 15, "time_steps": 10, "tol": 1e-9, "max_iter": 50},
        "scm": {"anchor_sample_size": 16, "scm_constraint_count": 4, "online_threshold": 0.6},
        "rb": {"train_size": 20, "sampling": "random", "eps_tol": 1e-3, "max_basis": 12},
        "sweep": {"mu": [1, 2, 3], "N": 4},
        "output": {"dir": "x"}, "seed": 99})");
    const RunConfig c = parse_config(j);
    EXPECT_EQ(c.model.mu_hi, 50.0);
    EXPECT_DOUBLE_EQ(c.dt, 0.1);
    EXPECT_EQ(c.tol, 1e-9);
    EXPECT_EQ(c.anchor_sample_size, 16u);
    EXPECT_EQ(c.online_threshold, 0.6);
    EXPECT_EQ(c.train.sampling, "random");
    EXPECT_EQ(c.max_basis, 12u);
    EXPECT_EQ(c.sweep.values.size(), 3u);
    EXPECT_EQ(c.figure_N, 4);
    EXPECT_EQ(c.output_dir, "x");
    EXPECT_EQ(c.seed, 99u);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"grid": {"dz": 1}})")), ConfigError);
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"bogus": 1})")), ConfigError);
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"grid": {"dx": "a"}})")), ConfigError);
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"sweep": {"mu": [150]}})")), ConfigError);
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"model": {"g_right": 0.3}})")), ConfigError);
    EXPECT_THROW((void)parse_config(nlohmann::json::parse(R"({"rb": {"sampling": "sobol"}})")), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Sampling, EquispacedAndSeededRandom) {
    const ModelSpec m;
    const std::vector<double> e = parameter_sample(m, {5, "equispaced", {}}, 0, 1);
    EXPECT_EQ(e, (std::vector<double>{0.0, 25.0, 50.0, 75.0, 100.0}));
    const SampleSpec r{64, "random", {}};
    const std::vector<double> a = parameter_sample(m, r, 7, 1), b = parameter_sample(m, r, 7, 1);
    const std::vector<double> c = parameter_sample(m, r, 8, 1), d = parameter_sample(m, r, 7, 2);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_NE(a, d);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    for (double v : a) EXPECT_TRUE(m.contains_mu(v));
    EXPECT_EQ(parameter_sample(m, {3, "random", {4.0, 2.0}}, 1, 1), (std::vector<double>{4.0, 2.0}));
}

TEST(Fingerprint, Fnv1aAndSensitivity) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
    const ModelSpec m;
    const Grid g1 = build_grid(m, 15.0, 0.1), g2 = build_grid(m, 7.5, 0.1);
    EXPECT_EQ(discretization_fingerprint(m, g1, 1e-10), discretization_fingerprint(m, g1, 1e-10));
    EXPECT_NE(discretization_fingerprint(m, g1, 1e-10), discretization_fingerprint(m, g2, 1e-10));
    EXPECT_NE(discretization_fingerprint(m, g1, 1e-10), discretization_fingerprint(m, g1, 1e-9));
}

TEST(Persistence, RoundTripPreservesOnlineResults) {
    const AffineSystem sys = desk_system();
    const OfflineData off = small_offline(sys);
    const fs::path dir = scratch("roundtrip");
    save_offline(dir, off);
    const OfflineData back = load_offline(dir, off.fingerprint);
    EXPECT_EQ(back.N(), off.N());
    EXPECT_EQ(back.anchors.R(), off.anchors.R());
    EXPECT_EQ(back.stage1_N, off.stage1_N);
    EXPECT_EQ(back.history.size(), off.history.size());
    EXPECT_EQ((back.reduced.R - off.reduced.R).cwiseAbs().maxCoeff(), 0.0);
    for (double mu : {3.0, 47.0, 91.0}) {
        const Certificate a = certificate(mu, off), b = certificate(mu, back);
        EXPECT_EQ(a.residual, b.residual);
        EXPECT_EQ(a.beta_lb, b.beta_lb);
        EXPECT_EQ(a.tau_ub, b.tau_ub);
    }
    EXPECT_EQ(back.basis.size(), off.basis.size());
    EXPECT_EQ((back.basis.back() - off.basis.back()).cwiseAbs().maxCoeff(), 0.0);
    const OfflineData lean = load_offline(dir, off.fingerprint, false);
    EXPECT_TRUE(lean.basis.empty());
    fs::remove_all(dir);
}

TEST(Persistence, MismatchAndCorruption) {
    const AffineSystem sys = desk_system();
    const OfflineData off = small_offline(sys);
    const fs::path dir = scratch("corrupt");
    save_offline(dir, off);
    try {
        (void)load_offline(dir, "ffffffffffffffff");
        FAIL() << "expected a fingerprint mismatch";
    } catch (const ArtifactError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find(off.fingerprint), std::string::npos);
        EXPECT_NE(what.find("ffffffffffffffff"), std::string::npos);
    }
    fs::resize_file(dir / "R.bin", 16);
    EXPECT_THROW((void)load_offline(dir, off.fingerprint), ArtifactError);
    {
        std::ofstream(dir / "manifest.json", std::ios::trunc) << "{ not json";
    }
    EXPECT_THROW((void)load_offline(dir, off.fingerprint), ArtifactError);
    EXPECT_THROW((void)load_offline(dir / "missing", off.fingerprint), ArtifactError);
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    const fs::path cfg = dir / "desk.json";
    std::ofstream(cfg) << R"({"grid": {"dx": 15, "time_steps": 10},
        "rb": {"train_size": 9, "eps_tol": 1e-3}, "scm": {"anchor_sample_size": 5}, "sweep": {"count": 5}})";
    const std::string base = "--config " + cfg.string() + " --out " + (dir / "out").string();
    EXPECT_EQ(run_cli("truth " + base + " --mu 0"), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "truth_mu0.txt"));
    EXPECT_TRUE(fs::exists(dir / "out" / "truth_mu0_log.txt"));
    EXPECT_EQ(run_cli("truth " + base + " --mu 120"), 2);
    EXPECT_EQ(run_cli("truth " + base + " --mu abc"), 2);
    EXPECT_EQ(run_cli("truth --config /nonexistent.json --mu 1"), 2);
    EXPECT_EQ(run_cli("online " + base), 3);  // no offline data yet
    EXPECT_EQ(run_cli("offline " + base), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "offline" / "manifest.json"));
    EXPECT_EQ(run_cli("online " + base + " --mu 10,20"), 0);

    // a different grid invalidates the stored artifacts
    const fs::path cfg2 = dir / "other.json";
    std::ofstream(cfg2) << R"({"grid": {"dx": 7.5, "time_steps": 10}})";
    EXPECT_EQ(run_cli("online --config " + cfg2.string() + " --out " + (dir / "out").string()), 3);
    {
        std::ofstream(dir / "out" / "offline" / "manifest.json", std::ios::trunc) << "garbage";
    }
    EXPECT_EQ(run_cli("online " + base), 3);
    EXPECT_EQ(run_cli("bogus"), 2);
    fs::remove_all(dir);
}

// Experiment runner: truth, offline, online and figures subcommands.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjbrb/config.hpp"
#include "hjbrb/io.hpp"
#include "hjbrb/rb.hpp"

namespace fs = std::filesystem;
using namespace hjbrb;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    void row(const std::vector<double>& values) { rows_.push_back(values); }

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? " " : "") << header_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? " " : "") << num(r[i]);
            os << '\n';
        }
        return os.str();
    }

    void write(const fs::path& p) const {
        std::ofstream out(p, std::ios::trunc);
        if (!out) throw ArtifactError("cannot write " + p.string());
        out << str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct Context {
    RunConfig cfg;
    Grid grid;
    AffineSystem sys;
    fs::path out;
    std::string fingerprint;
};

Context make_context(const std::string& config_path, const std::string& out_override, long long seed) {
    Context c;
    c.cfg = config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(config_path);
    if (!out_override.empty()) c.cfg.output_dir = out_override;
    if (seed >= 0) c.cfg.seed = static_cast<std::uint64_t>(seed);
    c.grid = build_grid(c.cfg.model, c.cfg.dx, c.cfg.dt);
    c.sys = assemble(c.cfg.model, c.grid);
    c.out = c.cfg.output_dir;
    c.fingerprint = discretization_fingerprint(c.cfg.model, c.grid, c.cfg.tol);
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw ArtifactError("cannot create output directory " + c.out.string());
    return c;
}

HowardOptions howard_options(const RunConfig& cfg) {
    HowardOptions h;
    h.tol = cfg.tol;
    h.max_iter = cfg.max_iter;
    return h;
}

std::vector<double> parse_mu_list(const std::vector<std::string>& raw, const ModelSpec& m) {
    std::vector<double> out;
    for (const std::string& item : raw) {
        std::stringstream ss(item);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ConfigError("--mu: not a number: " + tok);
            }
            if (used != tok.size()) throw ConfigError("--mu: not a number: " + tok);
            if (!m.contains_mu(v))
                throw ConfigError("--mu: " + tok + " outside [" + num(m.mu_lo) + ", " + num(m.mu_hi) + "]");
            out.push_back(v);
        }
    }
    return out;
}

std::string stem(double mu) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", mu);
    return buf;
}

int cmd_truth(const Context& c, const std::vector<double>& mus) {
    if (mus.empty()) throw ConfigError("truth: --mu is required");
    for (double mu : mus) {
        const HowardResult r = howard_solve(mu, c.sys, howard_options(c.cfg));
        Table sol({"t", "x", "gamma", "u"});
        for (std::size_t k = 0; k < c.grid.levels(); ++k)
            for (std::size_t j = 0; j < c.grid.nx; ++j) {
                const auto i = static_cast<Eigen::Index>(c.grid.index(k, j));
                sol.row({c.grid.t(k), c.grid.x(j), r.state.gamma[i], r.state.u[i]});
            }
        sol.write(c.out / ("truth_mu" + stem(mu) + ".txt"));
        Table log({"iteration", "residual"});
        for (std::size_t it = 0; it < r.residuals.size(); ++it)
            log.row({static_cast<double>(it + 1), r.residuals[it]});
        log.write(c.out / ("truth_mu" + stem(mu) + "_log.txt"));
        std::cout << "mu " << num(mu) << " iterations " << r.iterations << " residual " << num(r.residuals.back())
                  << '\n';
    }
    return 0;
}

GreedyOptions greedy_options(const Context& c) {
    GreedyOptions g;
    g.train = parameter_sample(c.cfg.model, c.cfg.train, c.cfg.seed, 1);
    SampleSpec anchor{c.cfg.anchor_sample_size, "equispaced", {}};
    g.anchor_train = parameter_sample(c.cfg.model, anchor, c.cfg.seed, 2);
    g.eps_tol = c.cfg.eps_tol;
    g.max_basis = c.cfg.max_basis;
    g.howard = howard_options(c.cfg);
    g.scm.threshold = c.cfg.online_threshold;
    g.scm.constraint_count = c.cfg.scm_constraint_count;
    g.log = [](const std::string& s) { std::cerr << s << '\n'; };
    return g;
}

int cmd_offline(const Context& c) {
    OfflineData off = greedy_offline(c.sys, greedy_options(c));
    off.fingerprint = c.fingerprint;
    save_offline(c.out / "offline", off);
    Table t({"N", "stage", "mu_selected", "max_tau", "max_delta"});
    for (const GreedyRecord& h : off.history)
        t.row({static_cast<double>(h.N), static_cast<double>(h.stage), h.mu_selected, h.max_tau, h.max_delta});
    t.write(c.out / "offline_summary.txt");
    std::cout << t.str();
    if (off.status != GreedyStatus::converged) {
        std::cerr << "greedy: " << off.diagnostic << '\n';
        return 4;
    }
    return 0;
}

double digest(const Vector& v) {
    // order-sensitive checksum of the coefficients
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += static_cast<double>(i + 1) * v[i];
    return s;
}

int cmd_online(const Context& c, std::vector<double> mus) {
    const OfflineData off = load_offline(c.out / "offline", c.fingerprint, false);
    if (mus.empty()) mus = parameter_sample(c.cfg.model, c.cfg.sweep, c.cfg.seed, 3);
    Table t({"mu", "coeffs_digest", "residual", "beta_lb", "tau_ub", "delta", "wall_time"});
    for (double mu : mus) {
        const auto t0 = std::chrono::steady_clock::now();
        const CertifiedSolution cs = certify_online(mu, off.reduced, off.anchors, off.scm, off.lipschitz.rho);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const Certificate& cert = cs.certificate;
        t.row({mu, digest(cs.solution.coeffs), cert.residual, cert.beta_lb, cert.tau_ub,
               cert.delta.value_or(std::numeric_limits<double>::quiet_NaN()), wall});
    }
    std::cout << t.str();
    return 0;
}

int cmd_figures(const Context& c) {
    const OfflineData off = load_offline(c.out / "offline", c.fingerprint, true);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double rho = off.lipschitz.rho;

    // inf-sup lower bounds over the anchor training sample
    {
        std::vector<std::string> head{"mu", "beta_exact"};
        for (std::size_t it = 0; it < off.anchor_history.size(); ++it) head.push_back("lb_" + std::to_string(it + 1));
        head.emplace_back("beta_lb_final");
        Table t(head);
        for (std::size_t i = 0; i < off.anchor_train.size(); ++i) {
            const double mu = off.anchor_train[i];
            const ReducedSolution s = off.reduced.solve(mu);
            const BetaResult b = exact_beta(mu, off.lift(s), c.sys);
            std::vector<double> row{mu, b.beta};
            for (const auto& h : off.anchor_history) row.push_back(h[i]);
            row.push_back(beta_lb(mu, s.coeffs, off.anchors, off.scm));
            t.row(row);
        }
        t.write(c.out / "fig1.txt");
    }

    const std::vector<double> test = parameter_sample(c.cfg.model, c.cfg.sweep, c.cfg.seed, 3);
    std::vector<TruthState> truth;
    truth.reserve(test.size());
    for (double mu : test) truth.push_back(howard_solve(mu, c.sys, howard_options(c.cfg)).state);

    const std::size_t N = off.N();
    struct Row {
        double tau, delta, err, res;
    };
    auto evaluate = [&](std::size_t i, std::size_t n) {
        const CertifiedSolution cs = certify_online(test[i], off.reduced, off.anchors, off.scm, rho, n);
        const double err = (off.lift(cs.solution).stacked() - truth[i].stacked()).norm();
        return Row{cs.certificate.tau_ub, cs.certificate.delta.value_or(nan), err, cs.certificate.residual};
    };

    {
        Table t({"N", "tau", "err_est", "err", "res"});
        for (std::size_t n = 1; n <= N; ++n) {
            double tau = 0.0, est = 0.0, err = 0.0, res = 0.0;
            for (std::size_t i = 0; i < test.size(); ++i) {
                const Row r = evaluate(i, n);
                tau = std::max(tau, r.tau);
                est = std::isnan(r.delta) || std::isnan(est) ? nan : std::max(est, r.delta);
                err = std::max(err, r.err);
                res = std::max(res, r.res);
            }
            t.row({static_cast<double>(n), tau, est, err, res});
        }
        t.write(c.out / "fig2.txt");
    }

    {
        const std::size_t n = c.cfg.figure_N > 0 ? std::min<std::size_t>(static_cast<std::size_t>(c.cfg.figure_N), N) : N;
        Table a({"mu", "tau", "err_est", "err", "res"});
        Table b({"mu", "effectivity"});
        for (std::size_t i = 0; i < test.size(); ++i) {
            const Row r = evaluate(i, n);
            a.row({test[i], r.tau, r.delta, r.err, r.res});
            // the ratio is meaningless where the error is at truth-solver noise level
            const double eff = (!std::isnan(r.delta) && r.err > kEffectivityErrorFloor) ? r.delta / r.err : nan;
            b.row({test[i], eff});
        }
        a.write(c.out / "fig3a.txt");
        b.write(c.out / "fig3b.txt");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified reduced-basis solver for a parameterized HJB equation"};
    app.require_subcommand(1);
    std::string config, out;
    long long seed = -1;
    std::vector<std::string> mu_raw;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON configuration file");
        sub->add_option("--out", out, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "random seed (overrides seed)");
    };
    CLI::App* truth = app.add_subcommand("truth", "solve the truth problem for given parameters");
    add_common(truth);
    truth->add_option("--mu", mu_raw, "parameter value(s), comma separated")->required();
    CLI::App* offline = app.add_subcommand("offline", "run the two-stage greedy and store offline data");
    add_common(offline);
    CLI::App* online = app.add_subcommand("online", "certified online solves from stored offline data");
    add_common(online);
    online->add_option("--mu", mu_raw, "parameter value(s), comma separated (default: sweep block)");
    CLI::App* figures = app.add_subcommand("figures", "write the figure data files");
    add_common(figures);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Context ctx = make_context(config, out, seed);
        const std::vector<double> mus = parse_mu_list(mu_raw, ctx.cfg.model);
        if (*truth) return cmd_truth(ctx, mus);
        if (*offline) return cmd_offline(ctx);
        if (*online) return cmd_online(ctx, mus);
        if (*figures) return cmd_figures(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const ArtifactError& e) {
        std::cerr << "artifact error: " << e.what() << '\n';
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const StateError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}

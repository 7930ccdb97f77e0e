// Command-line front end: every computation of the library behind one
// binary, JSON in, JSON/CSV out, fully determined by --seed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brm/brm.hpp"

namespace {

using namespace brm;

struct CommonOpts {
    std::string config_path;
    std::string output_path;  // empty: stdout
    std::uint64_t n_rep = 0;  // 0: keep config/default
    std::uint64_t seed = 0;
    int steps = 0;
    int threads = 0;
    bool have_seed = false;
};

struct JobConfig {
    RiskSpec spec;
    std::uint64_t n_rep = 100000;
    std::uint64_t seed = 1;
    int steps = 512;
    double lambda0 = 8.0;
    int grid = 0;
    double t_cap = 0.0;
    std::vector<double> u_sweep;
    std::string out_path;
    std::string format = "json";
};

JobConfig load_job(const CommonOpts& o) {
    json j = load_json_file(o.config_path);
    JobConfig cfg{parse_risk_spec(j.contains("spec") ? j["spec"] : j),
                  100000, 1, 512, 8.0, 0, 0.0, {}, "", "json"};
    if (j.contains("spec")) {
        reject_unknown_keys(j, {"spec", "options", "output"}, "config");
        if (j.contains("options")) {
            const json& op = j["options"];
            reject_unknown_keys(
                op, {"n_rep", "seed", "steps", "lambda0", "grid", "t_cap", "u_sweep"},
                "options");
            if (op.contains("n_rep")) cfg.n_rep = op["n_rep"].get<std::uint64_t>();
            if (op.contains("seed")) cfg.seed = op["seed"].get<std::uint64_t>();
            if (op.contains("steps")) cfg.steps = op["steps"].get<int>();
            if (op.contains("lambda0")) cfg.lambda0 = op["lambda0"].get<double>();
            if (op.contains("grid")) cfg.grid = op["grid"].get<int>();
            if (op.contains("t_cap")) cfg.t_cap = op["t_cap"].get<double>();
            if (op.contains("u_sweep")) {
                for (const auto& v : op["u_sweep"]) cfg.u_sweep.push_back(v.get<double>());
            }
        }
        if (j.contains("output")) {
            const json& out = j["output"];
            reject_unknown_keys(out, {"path", "format"}, "output");
            if (out.contains("path")) cfg.out_path = out["path"].get<std::string>();
            if (out.contains("format")) cfg.format = out["format"].get<std::string>();
            require(cfg.format == "json" || cfg.format == "csv",
                    "output.format must be json or csv");
        }
    }
    if (o.n_rep) cfg.n_rep = o.n_rep;
    if (o.have_seed) cfg.seed = o.seed;
    if (o.steps) cfg.steps = o.steps;
    if (!o.output_path.empty()) cfg.out_path = o.output_path;
    return cfg;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << text << "\n";
}

void write_times_csv(const std::string& path, const std::vector<double>& rescaled) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << "rescaled_time\n";
    char buf[40];
    for (double v : rescaled) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << "\n";
    }
}

int cmd_qp_solve(const CommonOpts& o) {
    json j = load_json_file(o.config_path);
    reject_unknown_keys(j, {"sigma", "gamma", "a"}, "qp-solve config");
    require(j.contains("a"), "qp-solve config needs \"a\"");
    require(j.contains("sigma") || j.contains("gamma"),
            "qp-solve config needs \"sigma\" or \"gamma\"");
    Vector a = parse_vector(j["a"], "a");
    CovModel model = j.contains("gamma")
                         ? CovModel::from_gamma(parse_matrix(j["gamma"], "gamma"))
                         : CovModel::from_sigma(parse_matrix(j["sigma"], "sigma"));
    auto sol = solve_pi_sigma(model, a);
    JsonWriter w;
    write_qp(w, sol);
    emit(w.str(), o.output_path);
    return 0;
}

int cmd_bound(const CommonOpts& o) {
    JobConfig cfg = load_job(o);
    auto res = sandwich(cfg.spec, cfg.n_rep, cfg.seed, o.threads);
    JsonWriter w;
    write_bounds(w, res);
    emit(w.str(), cfg.out_path);
    return 0;
}

int cmd_approx(const CommonOpts& o, const std::string& horizon, double lambda0_flag,
               int grid_flag) {
    JobConfig cfg = load_job(o);
    PickandsOptions opts;
    opts.n_rep = cfg.n_rep;
    opts.seed = cfg.seed;
    opts.n_threads = o.threads;
    opts.lambda0 = lambda0_flag > 0 ? lambda0_flag : cfg.lambda0;
    opts.grid_steps = grid_flag > 0 ? grid_flag : cfg.grid;
    AsymptoticEstimate est;
    if (horizon == "infinite" || (horizon.empty() && cfg.spec.infinite_horizon)) {
        cfg.spec.infinite_horizon = true;
        est = infinite_horizon_lograte(cfg.spec);
    } else {
        require(!cfg.spec.infinite_horizon,
                "config has t_end = inf; use --horizon infinite");
        est = psi_k_asymptotic(cfg.spec, opts);
    }
    JsonWriter w;
    write_asymptotic(w, est);
    emit(w.str(), cfg.out_path);
    return 0;
}

int cmd_simulate(const CommonOpts& o, double tcap_flag, const std::string& emit_times) {
    JobConfig cfg = load_job(o);
    SimOptions so;
    so.n_rep = cfg.n_rep;
    so.seed = cfg.seed;
    so.n_threads = o.threads;
    so.record_times = !emit_times.empty();
    SimResult res;
    if (cfg.spec.infinite_horizon) {
        double tc = tcap_flag > 0 ? tcap_flag : (cfg.t_cap > 0 ? cfg.t_cap : default_t_cap(cfg.spec));
        res = simulate_psi_infinite(cfg.spec, tc, cfg.steps, so);
    } else {
        res = simulate_psi(cfg.spec, cfg.steps, so);
    }
    if (!emit_times.empty()) write_times_csv(emit_times, res.hitting_times);
    JsonWriter w;
    write_sim(w, res);
    emit(w.str(), cfg.out_path);
    return 0;
}

int cmd_failure_time(const CommonOpts& o, const std::string& times_path) {
    JobConfig cfg = load_job(o);
    SimOptions so;
    so.n_rep = cfg.n_rep;
    so.seed = cfg.seed;
    so.n_threads = o.threads;
    auto ft = sample_failure_time(cfg.spec, cfg.steps, so);
    auto ks = ks_against_exponential(ft.rescaled, ft.rate);
    if (!times_path.empty()) write_times_csv(times_path, ft.rescaled);
    JsonWriter w;
    w.begin_object();
    w.key("rate").value(ft.rate);
    w.key("n_samples").value(static_cast<std::uint64_t>(ft.rescaled.size()));
    w.key("ks").begin_object();
    w.key("statistic").value(ks.statistic);
    w.key("critical_1pct").value(ks.critical);
    w.key("pass").value(ks.pass);
    w.end_object();
    w.key("psi_hat");
    write_mc(w, ft.sim.psi_hat);
    w.end_object();
    emit(w.str(), cfg.out_path);
    return 0;
}

int cmd_sweep(const CommonOpts& o, std::vector<double> u_flags, const std::string& format_flag) {
    JobConfig cfg = load_job(o);
    std::vector<double> us = !u_flags.empty() ? u_flags : cfg.u_sweep;
    require(!us.empty(), "sweep needs a u grid (--u or options.u_sweep)");
    std::string format = !format_flag.empty() ? format_flag : cfg.format;

    PickandsOptions popts;
    popts.n_rep = std::min<std::uint64_t>(cfg.n_rep, 500000);
    popts.seed = derive_seed(cfg.seed, 0xA5);
    popts.n_threads = o.threads;
    PsiKEvaluator evaluator(cfg.spec, popts);

    struct Row {
        double u, psi_sim, stderr_, lower, upper, asym, ratio;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < us.size(); ++i) {
        RiskSpec spec_u = cfg.spec;
        spec_u.u = us[i];
        SimOptions so;
        so.n_rep = cfg.n_rep;
        so.seed = cfg.seed;  // shared seed couples the sweep
        so.n_threads = o.threads;
        auto sim = simulate_psi(spec_u, cfg.steps, so);
        auto bnd = sandwich(spec_u, cfg.n_rep, derive_seed(cfg.seed, 0xB0), o.threads);
        auto asym = evaluator.evaluate(us[i]);
        rows.push_back({us[i], sim.psi_hat.value, sim.psi_hat.stderr_, bnd.lower.value,
                        bnd.upper.value, asym.value,
                        asym.value > 0 ? sim.psi_hat.value / asym.value : 0.0});
    }

    if (format == "csv") {
        std::string text = "u,psi_sim,stderr,lower,upper,asym,ratio";
        char buf[64];
        for (const auto& r : rows) {
            double vals[7] = {r.u, r.psi_sim, r.stderr_, r.lower, r.upper, r.asym, r.ratio};
            text += "\n";
            for (int c = 0; c < 7; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", vals[c]);
                text += (c ? "," : "") + std::string(buf);
            }
        }
        emit(text, cfg.out_path);
    } else {
        JsonWriter w;
        w.begin_array();
        for (const auto& r : rows) {
            w.begin_object();
            w.key("u").value(r.u);
            w.key("psi_sim").value(r.psi_sim);
            w.key("stderr").value(r.stderr_);
            w.key("lower").value(r.lower);
            w.key("upper").value(r.upper);
            w.key("asym").value(r.asym);
            w.key("ratio").value(r.ratio);
            w.end_object();
        }
        w.end_array();
        emit(w.str(), cfg.out_path);
    }
    return 0;
}

int cmd_example(const CommonOpts& o, int id, int d, double rho, int k, double u, double a_s,
                double c_s) {
    PickandsOptions popts;
    popts.n_rep = o.n_rep ? o.n_rep : 200000;
    popts.seed = o.have_seed ? o.seed : 1;
    popts.n_threads = o.threads;
    JsonWriter w;
    if (id == 1) {
        // k = 1 with positive thresholds: psi ~ 2 sum Phibar(a u + c)
        CovModel model = CovModel::equicorrelated(d, rho);
        RiskSpec spec{model, Vector::Constant(d, a_s), Vector::Constant(d, c_s),
                      u, 1, 0.0, 1.0, false};
        auto est = psi_k_asymptotic(spec, popts);
        double closed = 0.0;
        for (int i = 0; i < d; ++i) closed += 2.0 * norm_sf(a_s * u + c_s);
        w.begin_object();
        w.key("id").value(1);
        w.key("closed_form").value(closed);
        w.key("asymptotic");
        write_asymptotic(w, est);
        w.key("ratio").value(est.value > 0 ? closed / est.value : 0.0);
        w.end_object();
    } else if (id == 2) {
        // k = 2 with unit thresholds: dominant pairs by maximal correlation
        CovModel model = CovModel::equicorrelated(d, rho);
        Vector c = Vector::Constant(d, c_s);
        auto pairs = dominant_pairs(model.sigma(), c);
        RiskSpec spec{model, Vector::Constant(d, 1.0), c, u, 2, 0.0, 1.0, false};
        auto est = psi_k_asymptotic(spec, popts);
        w.begin_object();
        w.key("id").value(2);
        w.key("dominant_pairs").begin_array();
        for (auto [i, j] : pairs)
            w.begin_array().value(i + 1).value(j + 1).end_array();
        w.end_array();
        w.key("asymptotic");
        write_asymptotic(w, est);
        w.end_object();
    } else if (id == 3) {
        auto est = equicorrelated_closed_forms(d, rho, a_s, c_s, k, u, popts);
        auto closed = equi_solve(Vector::Constant(d, a_s), rho);
        w.begin_object();
        w.key("id").value(3);
        w.key("lambda").array(closed.lambda_full);
        w.key("full_index").value(closed.full_index);
        w.key("asymptotic");
        write_asymptotic(w, est);
        w.end_object();
    } else {
        throw ValidationError("example --id must be 1, 2 or 3");
    }
    emit(w.str(), o.output_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simultaneous-failure probabilities for correlated Brownian risk models"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--threads", common.threads, "worker thread cap (env BRM_THREADS)");

    auto add_common = [&](CLI::App* cmd, bool with_config = true) {
        if (with_config)
            cmd->add_option("--config", common.config_path, "JSON problem config")->required();
        cmd->add_option("--output", common.output_path, "output file (default stdout)");
        cmd->add_option("--nrep", common.n_rep, "Monte Carlo replications");
        cmd->add_option("--seed", common.seed, "RNG seed")
            ->each([&](const std::string&) { common.have_seed = true; });
        cmd->add_option("--steps", common.steps, "path grid steps");
    };

    auto* qp = app.add_subcommand("qp-solve", "solve the quadratic program");
    add_common(qp);

    auto* bound = app.add_subcommand("bound", "sandwich bounds");
    add_common(bound);

    std::string horizon;
    double lambda0_flag = 0.0;
    int grid_flag = 0;
    auto* approx = app.add_subcommand("approx", "asymptotic approximations");
    add_common(approx);
    approx->add_option("--horizon", horizon, "finite|infinite")
        ->check(CLI::IsMember({"finite", "infinite"}));
    approx->add_option("--lambda0", lambda0_flag, "initial truncation");
    approx->add_option("--grid", grid_flag, "path grid steps for the constant estimator");

    double tcap_flag = 0.0;
    std::string emit_times;
    auto* sim = app.add_subcommand("simulate", "path-simulation estimate of psi");
    add_common(sim);
    sim->add_option("--tcap", tcap_flag, "truncation horizon for t_end = inf");
    sim->add_option("--emit-times", emit_times, "CSV path for conditional hit times");

    std::string ft_out;
    auto* ft = app.add_subcommand("failure-time", "conditional failure-time law");
    add_common(ft);
    ft->add_option("--out", ft_out, "CSV path for rescaled samples");

    std::vector<double> u_flags;
    std::string format_flag;
    auto* sweep = app.add_subcommand("sweep", "u-sweep of simulator, bounds, asymptotics");
    add_common(sweep);
    sweep->add_option("--u", u_flags, "threshold scales")->delimiter(',');
    sweep->add_option("--format", format_flag, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));

    int ex_id = 0, ex_d = 2, ex_k = 2;
    double ex_rho = 0.0, ex_u = 3.0, ex_a = 1.0, ex_c = 0.0;
    auto* ex = app.add_subcommand("example", "built-in closed-form examples");
    add_common(ex, false);
    ex->add_option("--id", ex_id, "example id: 1, 2 or 3")->required();
    ex->add_option("--d", ex_d, "dimension");
    ex->add_option("--rho", ex_rho, "equi-correlation");
    ex->add_option("--k", ex_k, "failure count");
    ex->add_option("--u", ex_u, "threshold scale");
    ex->add_option("--a", ex_a, "common threshold shape");
    ex->add_option("--c", ex_c, "common drift");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (qp->parsed()) return cmd_qp_solve(common);
        if (bound->parsed()) return cmd_bound(common);
        if (approx->parsed()) return cmd_approx(common, horizon, lambda0_flag, grid_flag);
        if (sim->parsed()) return cmd_simulate(common, tcap_flag, emit_times);
        if (ft->parsed()) return cmd_failure_time(common, ft_out);
        if (sweep->parsed()) return cmd_sweep(common, u_flags, format_flag);
        if (ex->parsed()) return cmd_example(common, ex_id, ex_d, ex_rho, ex_k, ex_u, ex_a, ex_c);
    } catch (const brm::ValidationError& e) {
        std::cerr << "{\"error\":{\"type\":\"" << e.kind() << "\",\"message\":\"" << e.what()
                  << "\"}}\n";
        return 2;
    } catch (const brm::NumericalError& e) {
        std::cerr << "{\"error\":{\"type\":\"" << e.kind() << "\",\"message\":\"" << e.what()
                  << "\"}}\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":{\"type\":\"Internal\",\"message\":\"" << e.what() << "\"}}\n";
        return 3;
    }
    return 0;
}

/// @brief Command-line front end: data generation, initialization, training,
/// Hessian analysis, activation tables and experiment grids.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nnrecover/nnrecover.hpp"

using namespace nnrecover;

namespace {

void emit(const json& j, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(out);
    if (!f) throw Error("cannot write '" + out + "'");
    f << j.dump(2) << '\n';
}

int print_checks(const std::string& label, const GridOutcome& o) {
    std::cerr << label << ": ran " << o.executed << " trial(s)\n";
    for (const auto& c : o.checks)
        std::cerr << (c.passed ? "  PASS " : "  FAIL ") << c.name << " (" << c.detail << ")\n";
    return o.all_passed() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameter recovery for one-hidden-layer networks"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a teacher network and optionally samples");
    Index g_d = 10, g_k = 5, g_n = 0;
    double g_kappa = 2.0;
    std::uint64_t g_seed = 1;
    std::string g_act = "squared_relu", g_out = "teacher.json", g_samples;
    gen->add_option("--d", g_d, "input dimension")->capture_default_str();
    gen->add_option("--k", g_k, "hidden units")->capture_default_str();
    gen->add_option("--kappa", g_kappa, "condition number of W*")->capture_default_str();
    gen->add_option("--seed", g_seed, "seed")->capture_default_str();
    gen->add_option("--activation", g_act, "activation name")->capture_default_str();
    gen->add_option("--out", g_out, "teacher JSON path")->capture_default_str();
    gen->add_option("--n", g_n, "number of samples to write (0: none)")->capture_default_str();
    gen->add_option("--samples", g_samples, "samples CSV path (header x1..xd,y)");

    // shared options for teacher-driven commands
    std::string teacher_path;
    Index n = 10000;
    std::uint64_t seed = 1;
    bool shared = false, control_variates = false;

    auto* init = app.add_subcommand("init", "Tensor initialization; prints the result as JSON");
    bool i_population = false;
    std::string i_out;
    init->add_option("--teacher", teacher_path, "teacher JSON")->required();
    init->add_option("--n", n, "samples")->capture_default_str();
    init->add_option("--seed", seed, "seed for samples and the initialization")->capture_default_str();
    init->add_flag("--shared-moments", shared, "use all samples for every moment");
    init->add_flag("--control-variates", control_variates, "Hermite control variates in the moment estimates");
    init->add_flag("--population", i_population, "use exact moments of the teacher");
    init->add_option("--out", i_out, "output JSON path (default stdout)");

    auto* train = app.add_subcommand("train", "Gradient descent from a chosen starting point");
    std::string t_init = "tensor", t_trace, t_out;
    std::optional<double> t_eta;
    int t_iters = 1000;
    double t_tol = 0.01;
    bool t_resample = false;
    train->add_option("--teacher", teacher_path, "teacher JSON")->required();
    train->add_option("--n", n, "samples")->capture_default_str();
    train->add_option("--seed", seed, "seed")->capture_default_str();
    train->add_option("--init", t_init, "tensor | random | oracle-v")->capture_default_str();
    train->add_option("--eta", t_eta, "step size (default: 1/(k v_max^2 sigma_1^{2p}) from the start)");
    train->add_option("--iters", t_iters, "iteration cap")->capture_default_str();
    train->add_option("--tol", t_tol, "stop once the relative error is below this (0: never)")->capture_default_str();
    train->add_flag("--resample", t_resample, "fresh sample block per step");
    train->add_flag("--shared-moments", shared, "use all samples for every moment");
    train->add_flag("--control-variates", control_variates, "Hermite control variates in the moment estimates");
    train->add_option("--trace", t_trace, "per-iteration CSV path (iter,rel_err,risk)");
    train->add_option("--out", t_out, "report JSON path (default stdout)");

    auto* hess = app.add_subcommand("hessian", "Empirical Hessian spectrum near W*");
    double h_offset = 0.0;
    int h_bootstrap = 0;
    int h_directions = 0;
    hess->add_option("--teacher", teacher_path, "teacher JSON")->required();
    hess->add_option("--n", n, "samples")->capture_default_str();
    hess->add_option("--seed", seed, "seed")->capture_default_str();
    hess->add_option("--offset", h_offset, "relative distance |W - W*|_F / |W*|_F")->capture_default_str();
    hess->add_option("--bootstrap", h_bootstrap, "bootstrap replicates for a lambda_min standard error");
    hess->add_option("--directions", h_directions,
                     "report the smallest lambda_min over this many antithetic direction pairs at --offset "
                     "(0: one random direction)");

    auto* rh = app.add_subcommand("rho", "Gaussian moment table (alpha, beta, rho) as CSV");
    std::vector<std::string> r_acts{"relu", "leaky_relu", "squared_relu", "erf", "sigmoid", "tanh"};
    std::vector<double> r_sigma{1.0};
    rh->add_option("--activation", r_acts, "activation names")->capture_default_str();
    rh->add_option("--sigma", r_sigma, "sigma values")->capture_default_str()->delimiter(',');

    auto* grid = app.add_subcommand("grid", "Experiment grids driven by a JSON config");
    grid->require_subcommand(1);
    std::string cfg_path, out_dir;
    auto add_grid = [&](const char* name, const char* desc) {
        auto* s = grid->add_subcommand(name, desc);
        s->add_option("config", cfg_path, "config JSON")->required()->check(CLI::ExistingFile);
        s->add_option("--output-dir", out_dir, "override the config's output directory");
        return s;
    };
    auto* g_rec = add_grid("recovery", "Recovery rate over (d, n)");
    auto* g_init = add_grid("init", "Tensor initialization error over (d, n)");
    auto* g_conv = add_grid("convergence", "Objective vs iteration for three starting points");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            TeacherNetwork t = generate_teacher(g_d, g_k, g_kappa, g_seed, activation_by_name(g_act));
            save_teacher(t, g_out);
            if (g_n > 0) {
                if (g_samples.empty()) throw Error("--n requires --samples");
                std::ofstream f(g_samples);
                write_samples_csv(sample(t, g_n, g_seed), f);
            }
            return 0;
        }
        if (*init) {
            TeacherNetwork t = load_teacher(teacher_path);
            InitConfig ic;
            ic.seed = seed;
            ic.estimator.partition = !shared;
            ic.estimator.control_variates = control_variates;
            InitResult r = i_population ? initialize(PopulationMoments(t), t.k(), t.act, ic)
                                        : initialize(sample(t, n, seed), t.k(), t.act, ic);
            json j = init_result_to_json(r);
            MatchResult m = recovery_error(r.W0, r.v0, t);
            j["init_err"] = m.rel_err;
            j["v_correct"] = m.v_matched;
            emit(j, i_out);
            return 0;
        }
        if (*train) {
            TeacherNetwork t = load_teacher(teacher_path);
            SampleSet S = sample(t, n, seed);
            Matrix W0;
            Vector v0;
            GdConfig g;
            g.eta = t_eta;
            g.T = t_iters;
            g.tol = t_tol;
            g.resample = t_resample;
            const InitMode mode = init_mode_from_string(t_init);
            if (mode == InitMode::Tensor) {
                InitConfig ic;
                ic.seed = seed;
                ic.estimator.partition = !shared;
                ic.estimator.control_variates = control_variates;
                // with resampling the first block is reserved for the initialization
                SampleSet init_set = t_resample ? S.slice(0, S.n() / (t_iters + 1)) : S;
                InitResult r = initialize(init_set, t.k(), t.act, ic);
                W0 = r.W0;
                v0 = r.v0;
            } else {
                W0 = random_weights(t.d(), t.k(), seed);
                v0 = mode == InitMode::RandomWv ? random_output_weights(t.k(), seed) : t.v;
                g.train_v = mode == InitMode::RandomWv;
            }
            RecoveryReport rep = learn(S, t.act, W0, v0, g, &t);
            if (!t_trace.empty()) {
                std::ofstream f(t_trace);
                f << "iter,rel_err,risk\n";
                for (std::size_t i = 0; i < rep.risk.size(); ++i)
                    f << i << ',' << fmt(rep.rel_err[i]) << ',' << fmt(rep.risk[i]) << '\n';
            }
            emit(recovery_report_to_json(rep), t_out);
            return 0;
        }
        if (*hess) {
            TeacherNetwork t = load_teacher(teacher_path);
            SampleSet S = sample(t, n, seed);
            Matrix W = h_directions > 0 ? neighborhood_lambda_min(t, S, h_offset, h_directions, seed).W
                                        : perturb(t, h_offset, seed);
            HessianReport r = spectrum_report(t, W, S);
            json j = {{"lambda_min", r.lambda_min},     {"lambda_max", r.lambda_max},
                      {"theory_lower", r.theory_lower}, {"theory_upper", r.theory_upper},
                      {"ratio_lower", r.ratio_lower},   {"ratio_upper", r.ratio_upper},
                      {"n", r.n},                       {"distance", r.distance}};
            if (h_bootstrap > 1) j["lambda_min_se"] = bootstrap_lambda_min_se(t, W, S, h_bootstrap, seed);
            emit(j, "");
            return 0;
        }
        if (*rh) {
            std::vector<std::pair<std::string, MomentProfile>> cols;
            for (const auto& a : r_acts) {
                ActivationSpec act = activation_by_name(a);
                for (double s : r_sigma) cols.emplace_back(a + "(sigma=" + fmt(s) + ")", gaussian_moments(act, s));
            }
            std::cout << "quantity";
            for (const auto& [name, mp] : cols) std::cout << ',' << name;
            std::cout << '\n';
            auto row = [&](const char* label, auto get) {
                std::cout << label;
                for (const auto& [name, mp] : cols) std::cout << ',' << fmt(get(mp));
                std::cout << '\n';
            };
            row("alpha0", [](const MomentProfile& m) { return m.alpha[0]; });
            row("alpha1", [](const MomentProfile& m) { return m.alpha[1]; });
            row("alpha2", [](const MomentProfile& m) { return m.alpha[2]; });
            row("beta0", [](const MomentProfile& m) { return m.beta0; });
            row("beta2", [](const MomentProfile& m) { return m.beta2; });
            row("rho", [](const MomentProfile& m) { return m.rho; });
            return 0;
        }
        if (*grid) {
            ExperimentConfig c = load_config(cfg_path);
            if (!out_dir.empty()) c.output_dir = out_dir;
            if (*g_rec) return print_checks("recovery grid", run_recovery_grid(c));
            if (*g_init) return print_checks("init grid", run_init_error_grid(c));
            if (*g_conv) {
                ConvergenceOutcome o = run_convergence_comparison(c);
                for (const auto& tr : o.traces)
                    if (!tr.objective.empty())
                        std::cerr << "approach " << tr.name << ": " << tr.objective.size() - 1
                              << " steps, final objective " << fmt(tr.objective.back())
                              << (tr.error.empty() ? "" : " (" + tr.error + ")") << '\n';
                return print_checks("convergence comparison", o);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "init.hpp"
#include "model.hpp"
#include "train.hpp"

namespace nnrecover {

/// Starting point used by a recovery or convergence run.
enum class InitMode { Tensor, RandomWv, RandomWOracleV };

inline const char* to_string(InitMode m) {
    switch (m) {
    case InitMode::Tensor: return "tensor";
    case InitMode::RandomWv: return "random-Wv";
    case InitMode::RandomWOracleV: return "random-W-oracle-v";
    }
    return "?";
}

inline InitMode init_mode_from_string(const std::string& s) {
    if (s == "tensor") return InitMode::Tensor;
    if (s == "random-Wv" || s == "random") return InitMode::RandomWv;
    if (s == "random-W-oracle-v" || s == "oracle-v") return InitMode::RandomWOracleV;
    throw Error("unknown init mode '" + s + "' (tensor | random-Wv | random-W-oracle-v)");
}

/**
 * @brief Parameters of an experiment grid.
 *
 * Thresholds are optional; each one that is present is checked after the run
 * and a violation makes the run report failure.
 */
struct ExperimentConfig {
    std::vector<Index> d_values{10, 25, 50};
    std::vector<Index> n_values{1000, 3000, 10000};
    Index k = 5;
    double kappa = 2.0;
    std::string activation = "squared_relu";
    int trials = 10;
    std::uint64_t master_seed = 1;
    InitMode init = InitMode::Tensor;
    std::optional<double> eta = 0.02;
    int iters = 1000;
    double tol = 0.01;
    bool resample = false;
    bool population_moments = false; ///< exact moments instead of samples (init grid)
    InitConfig init_config{};
    std::string output_dir = "results";
    bool gnuplot = true;

    // convergence comparison
    double objective_floor = 1e-20; ///< a run stops once its objective drops below this
    int fit_window = 100;           ///< iterations used for the log-linear fit

    nlohmann::json thresholds = nlohmann::json::object();

    void validate() const {
        if (d_values.empty() || n_values.empty()) throw Error("config: d and n grids must be nonempty");
        if (trials < 1) throw Error("config: trials must be >= 1");
        if (iters < 1) throw Error("config: iters must be >= 1");
        if (eta && !(*eta > 0.0)) throw Error("config: eta must be positive");
        for (Index d : d_values)
            if (d < k) throw Error("config: every d must be >= k");
        for (Index n : n_values)
            if (n < 6) throw Error("config: every n must be >= 6");
    }
};

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("d")) c.d_values = j.at("d").get<std::vector<Index>>();
    if (j.contains("n")) c.n_values = j.at("n").get<std::vector<Index>>();
    c.k = j.value("k", c.k);
    c.kappa = j.value("kappa", c.kappa);
    c.activation = j.value("activation", c.activation);
    c.trials = j.value("trials", c.trials);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("init")) c.init = init_mode_from_string(j.at("init").get<std::string>());
    if (j.contains("eta")) {
        if (j.at("eta").is_null() || j.at("eta") == "theory") c.eta.reset();
        else c.eta = j.at("eta").get<double>();
    }
    c.iters = j.value("iters", c.iters);
    c.tol = j.value("tol", c.tol);
    c.resample = j.value("resample", c.resample);
    c.population_moments = j.value("population_moments", c.population_moments);
    c.init_config.estimator.partition = !j.value("shared_moments", false);
    c.init_config.estimator.control_variates = j.value("control_variates", false);
    c.init_config.projections = j.value("projections", c.init_config.projections);
    c.init_config.als_iters = j.value("als_iters", c.init_config.als_iters);
    c.init_config.power.max_iters = j.value("power_iters", c.init_config.power.max_iters);
    c.init_config.power.tol = j.value("power_tol", c.init_config.power.tol);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.gnuplot = j.value("gnuplot", c.gnuplot);
    c.objective_floor = j.value("objective_floor", c.objective_floor);
    c.fit_window = j.value("fit_window", c.fit_window);
    if (j.contains("thresholds")) c.thresholds = j.at("thresholds");
    (void)activation_by_name(c.activation);
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    return config_from_json(nlohmann::json::parse(in));
}

/// Worker count from NNREC_WORKERS, else the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("NNREC_WORKERS")) {
        int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on a pool of @p workers threads.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < count; i = next++) job(i);
    };
    const int w = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (w == 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
}

/// Per-trial seed, a hash of (master, d, n, trial).
inline std::uint64_t trial_seed(std::uint64_t master, Index d, Index n, int trial) {
    return derive_seed(master, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(trial)});
}

/// Shortest round-trip decimal representation.
inline std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Replaces characters that would break a CSV cell.
inline std::string csv_tag(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
    return s;
}

/// One CSV row keyed by (d, n, trial).
struct GridRow {
    Index d = 0, n = 0;
    int trial = 0;
    std::string line;
    auto key() const { return std::tie(d, n, trial); }
};

/**
 * @brief Resumable grid CSV: existing rows are kept, new rows merged, and the
 * file rewritten sorted by (d, n, trial).
 */
class GridCsv {
  public:
    GridCsv(std::string path, std::string header) : path_(std::move(path)), header_(std::move(header)) {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        if (!std::getline(in, line) || line != header_)
            throw Error("existing file '" + path_ + "' has a different header; remove it to start over");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            GridRow r;
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            r.d = std::stol(cell);
            std::getline(ss, cell, ',');
            r.n = std::stol(cell);
            std::getline(ss, cell, ',');
            r.trial = std::stoi(cell);
            r.line = line;
            rows_[{r.d, r.n, r.trial}] = r;
        }
    }
    bool has(Index d, Index n, int trial) const { return rows_.count({d, n, trial}) > 0; }
    void add(GridRow r) { rows_[{r.d, r.n, r.trial}] = std::move(r); }
    std::vector<GridRow> rows() const {
        std::vector<GridRow> out;
        for (const auto& [k, r] : rows_) out.push_back(r);
        return out;
    }
    void write() const {
        std::filesystem::path p(path_);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        const std::string tmp = path_ + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw Error("cannot write '" + tmp + "'");
            out << header_ << '\n';
            for (const auto& [k, r] : rows_) out << r.line << '\n';
        }
        std::filesystem::rename(tmp, path_);
    }

  private:
    std::string path_, header_;
    std::map<std::tuple<Index, Index, int>, GridRow> rows_;
};

/// Outcome of one threshold check.
struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct GridOutcome {
    std::vector<Check> checks;
    int executed = 0; ///< trials run (not resumed)
    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

inline void write_checks(const std::string& dir, const std::string& name, const std::vector<Check>& checks) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : checks) j.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    std::ofstream(std::filesystem::path(dir) / (name + "_checks.json")) << j.dump(2) << '\n';
}

namespace harness_detail {

struct Cell {
    Index d, n;
    int trial;
};

inline std::vector<Cell> cells(const ExperimentConfig& c) {
    std::vector<Cell> out;
    for (Index d : c.d_values)
        for (Index n : c.n_values)
            for (int t = 0; t < c.trials; ++t) out.push_back({d, n, t});
    return out;
}

inline std::string error_tag(const std::exception& e) {
    if (auto* s = dynamic_cast<const StageError*>(&e)) return "init-" + s->stage();
    if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
    if (dynamic_cast<const EligibilityError*>(&e)) return "eligibility";
    return "error";
}

/// Starting point (W0, v0) for a trial.
inline std::pair<Matrix, Vector> starting_point(const ExperimentConfig& c, const TeacherNetwork& t,
                                                const SampleSet& S, std::uint64_t seed, InitMode mode) {
    switch (mode) {
    case InitMode::Tensor: {
        InitConfig ic = c.init_config;
        ic.seed = derive_seed(seed, "init");
        InitResult r = c.population_moments ? initialize(PopulationMoments(t), c.k, t.act, ic)
                                            : initialize(S, c.k, t.act, ic);
        return {r.W0, r.v0};
    }
    case InitMode::RandomWv:
        return {random_weights(t.d(), c.k, seed), random_output_weights(c.k, seed)};
    case InitMode::RandomWOracleV:
        return {random_weights(t.d(), c.k, seed), t.v};
    }
    throw Error("unreachable");
}

/// Appends timing rows (d, n, trial, seconds) to a sidecar file.
inline void append_timing(const std::string& path, const std::vector<std::tuple<Index, Index, int, double>>& rows) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh) out << "d,n,trial,seconds\n";
    for (const auto& [d, n, t, s] : rows) out << d << ',' << n << ',' << t << ',' << fmt(s) << '\n';
}

template <class T> double mean_of(const std::vector<T>& v) {
    double s = 0.0;
    for (auto x : v) s += static_cast<double>(x);
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

} // namespace harness_detail

/// Aggregated recovery rate of one (d, n) cell.
struct RateCell {
    Index d, n;
    int trials = 0, successes = 0;
    double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

/**
 * @brief Fig. 1(a)-style recovery grid.
 *
 * Writes recovery.csv (d,n,trial,seed,success,rel_err,iters,error), the
 * aggregate recovery_rate.csv, recovery_rate.dat for gnuplot, and wall times
 * to recovery_timing.csv. Completed (d, n, trial) keys are skipped on rerun.
 *
 * Threshold keys: "min_rate" / "max_rate" as lists of {d, n, rate}, and
 * "monotone_in_d_slack" (trials of slack allowed when checking that the rate
 * does not increase with d at fixed n).
 */
inline GridOutcome run_recovery_grid(const ExperimentConfig& c) {
    using namespace harness_detail;
    c.validate();
    std::filesystem::create_directories(c.output_dir);
    const auto dir = std::filesystem::path(c.output_dir);
    GridCsv csv((dir / "recovery.csv").string(), "d,n,trial,seed,success,rel_err,iters,error");
    const ActivationSpec act = activation_by_name(c.activation);

    std::vector<Cell> todo;
    for (const auto& cell : cells(c))
        if (!csv.has(cell.d, cell.n, cell.trial)) todo.push_back(cell);
    std::vector<GridRow> results(todo.size());
    std::vector<std::tuple<Index, Index, int, double>> timing(todo.size());
    parallel_for(todo.size(), worker_count(), [&](std::size_t i) {
        const Cell& cell = todo[i];
        const std::uint64_t seed = trial_seed(c.master_seed, cell.d, cell.n, cell.trial);
        const auto start = std::chrono::steady_clock::now();
        bool success = false;
        double rel = std::numeric_limits<double>::infinity();
        int iters = 0;
        std::string tag;
        try {
            TeacherNetwork t = generate_teacher(cell.d, c.k, c.kappa, seed, act);
            SampleSet S = sample(t, cell.n, seed);
            auto [W0, v0] = starting_point(c, t, S, seed, c.init);
            GdConfig g;
            g.eta = c.eta;
            g.T = c.iters;
            g.tol = c.tol;
            g.resample = c.resample;
            g.train_v = c.init == InitMode::RandomWv;
            g.record_trace = false;
            RecoveryReport rep = learn(S, act, W0, v0, g, &t);
            success = rep.success;
            rel = rep.rel_err.back();
            iters = rep.iterations;
        } catch (const std::exception& e) {
            tag = error_tag(e);
        }
        std::ostringstream os;
        os << cell.d << ',' << cell.n << ',' << cell.trial << ',' << seed << ',' << (success ? 1 : 0) << ','
           << fmt(rel) << ',' << iters << ',' << csv_tag(tag);
        results[i] = {cell.d, cell.n, cell.trial, os.str()};
        timing[i] = {cell.d, cell.n, cell.trial,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    });
    for (auto& r : results) csv.add(r);
    csv.write();
    if (!timing.empty()) append_timing((dir / "recovery_timing.csv").string(), timing);

    // aggregate over the configured grid
    std::map<std::pair<Index, Index>, RateCell> agg;
    for (const auto& r : csv.rows()) {
        std::stringstream ss(r.line);
        std::string cell;
        for (int f = 0; f < 5; ++f) std::getline(ss, cell, ',');
        auto& a = agg[{r.d, r.n}];
        a.d = r.d;
        a.n = r.n;
        a.trials++;
        a.successes += cell == "1";
    }
    {
        std::ofstream out(dir / "recovery_rate.csv");
        out << "d,n,trials,successes,rate\n";
        for (const auto& [k, a] : agg) out << a.d << ',' << a.n << ',' << a.trials << ',' << a.successes << ',' << fmt(a.rate()) << '\n';
    }
    if (c.gnuplot) {
        std::ofstream out(dir / "recovery_rate.dat");
        out << "# d n rate (blocks by d, for splot/pm3d)\n";
        Index last = -1;
        for (const auto& [k, a] : agg) {
            if (last != -1 && a.d != last) out << '\n';
            out << a.d << ' ' << a.n << ' ' << fmt(a.rate()) << '\n';
            last = a.d;
        }
    }

    GridOutcome out;
    out.executed = static_cast<int>(todo.size());
    const auto& th = c.thresholds;
    auto find = [&](Index d, Index n) -> const RateCell* {
        auto it = agg.find({d, n});
        return it == agg.end() ? nullptr : &it->second;
    };
    for (const char* key : {"min_rate", "max_rate"}) {
        if (!th.contains(key)) continue;
        for (const auto& e : th.at(key)) {
            Index d = e.at("d"), n = e.at("n");
            double want = e.at("rate");
            const RateCell* a = find(d, n);
            Check ch;
            ch.name = std::string(key) + " d=" + std::to_string(d) + " n=" + std::to_string(n);
            if (!a) {
                ch.detail = "cell not in grid";
            } else {
                ch.passed = std::string(key) == "min_rate" ? a->rate() >= want : a->rate() <= want;
                ch.detail = "rate " + fmt(a->rate()) + (std::string(key) == "min_rate" ? " >= " : " <= ") + fmt(want);
            }
            out.checks.push_back(ch);
        }
    }
    if (th.contains("monotone_in_d_slack")) {
        const int slack = th.at("monotone_in_d_slack");
        Check ch{"rate non-increasing in d", true, ""};
        for (Index n : c.n_values) {
            std::vector<Index> ds = c.d_values;
            std::sort(ds.begin(), ds.end());
            for (std::size_t i = 1; i < ds.size(); ++i) {
                const RateCell *a = find(ds[i - 1], n), *b = find(ds[i], n);
                if (!a || !b) continue;
                if (b->successes > a->successes + slack) {
                    ch.passed = false;
                    ch.detail += "n=" + std::to_string(n) + ": d=" + std::to_string(ds[i]) + " beats d=" +
                                 std::to_string(ds[i - 1]) + "; ";
                }
            }
        }
        if (ch.passed) ch.detail = "within " + std::to_string(slack) + " trial(s) of slack";
        out.checks.push_back(ch);
    }
    write_checks(c.output_dir, "recovery", out.checks);
    return out;
}

/// Aggregated initialization error of one (d, n) cell.
struct InitCell {
    Index d, n;
    std::vector<double> errors;
    bool all_v_correct = true;
    int failures = 0;
    double mean() const { return harness_detail::mean_of(errors); }
    /// Value plotted for the cell: the mean error, or +inf ("pure dark") if any trial got v wrong.
    double plot_value() const {
        return all_v_correct && failures == 0 ? mean() : std::numeric_limits<double>::infinity();
    }
};

/**
 * @brief Fig. 1(b)-style tensor-initialization error grid.
 *
 * Writes init.csv (d,n,trial,init_err,v_correct,error), init_error.csv with
 * the per-cell mean and the plotted value (inf when any trial recovered v
 * incorrectly), init_error.dat for gnuplot and init_timing.csv.
 *
 * Threshold keys: "decreasing_in_n" (mean error strictly decreasing in n at
 * every d) and "max_init_err" (every trial's error at most this value).
 */
inline GridOutcome run_init_error_grid(const ExperimentConfig& c) {
    using namespace harness_detail;
    c.validate();
    std::filesystem::create_directories(c.output_dir);
    const auto dir = std::filesystem::path(c.output_dir);
    GridCsv csv((dir / "init.csv").string(), "d,n,trial,init_err,v_correct,error");
    const ActivationSpec act = activation_by_name(c.activation);

    std::vector<Cell> todo;
    for (const auto& cell : cells(c))
        if (!csv.has(cell.d, cell.n, cell.trial)) todo.push_back(cell);
    std::vector<GridRow> results(todo.size());
    std::vector<std::tuple<Index, Index, int, double>> timing(todo.size());
    parallel_for(todo.size(), worker_count(), [&](std::size_t i) {
        const Cell& cell = todo[i];
        const std::uint64_t seed = trial_seed(c.master_seed, cell.d, cell.n, cell.trial);
        const auto start = std::chrono::steady_clock::now();
        double err = std::numeric_limits<double>::infinity();
        bool vok = false;
        std::string tag;
        try {
            TeacherNetwork t = generate_teacher(cell.d, c.k, c.kappa, seed, act);
            SampleSet S = c.population_moments ? SampleSet{} : sample(t, cell.n, seed);
            auto [W0, v0] = starting_point(c, t, S, seed, InitMode::Tensor);
            MatchResult m = recovery_error(W0, v0, t);
            err = m.rel_err;
            vok = m.v_matched;
        } catch (const std::exception& e) {
            tag = error_tag(e);
        }
        std::ostringstream os;
        os << cell.d << ',' << cell.n << ',' << cell.trial << ',' << fmt(err) << ',' << (vok ? 1 : 0) << ','
           << csv_tag(tag);
        results[i] = {cell.d, cell.n, cell.trial, os.str()};
        timing[i] = {cell.d, cell.n, cell.trial,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    });
    for (auto& r : results) csv.add(r);
    csv.write();
    if (!timing.empty()) append_timing((dir / "init_timing.csv").string(), timing);

    std::map<std::pair<Index, Index>, InitCell> agg;
    for (const auto& r : csv.rows()) {
        std::stringstream ss(r.line);
        std::string cell, err, vok, tag;
        for (int f = 0; f < 3; ++f) std::getline(ss, cell, ',');
        std::getline(ss, err, ',');
        std::getline(ss, vok, ',');
        std::getline(ss, tag);
        auto& a = agg.try_emplace({r.d, r.n}, InitCell{r.d, r.n, {}, true, 0}).first->second;
        if (!tag.empty()) {
            a.failures++;
            a.all_v_correct = false;
            continue;
        }
        a.errors.push_back(std::strtod(err.c_str(), nullptr));
        if (vok != "1") a.all_v_correct = false;
    }
    {
        std::ofstream out(dir / "init_error.csv");
        out << "d,n,trials,failures,mean_init_err,all_v_correct,plot_value\n";
        for (const auto& [k, a] : agg)
            out << a.d << ',' << a.n << ',' << a.errors.size() + a.failures << ',' << a.failures << ','
                << fmt(a.mean()) << ',' << (a.all_v_correct ? 1 : 0) << ',' << fmt(a.plot_value()) << '\n';
    }
    if (c.gnuplot) {
        std::ofstream out(dir / "init_error.dat");
        out << "# d n plot_value (inf marks a cell where some trial recovered v incorrectly)\n";
        Index last = -1;
        for (const auto& [k, a] : agg) {
            if (last != -1 && a.d != last) out << '\n';
            out << a.d << ' ' << a.n << ' ' << fmt(a.plot_value()) << '\n';
            last = a.d;
        }
    }

    GridOutcome out;
    out.executed = static_cast<int>(todo.size());
    const auto& th = c.thresholds;
    if (th.value("decreasing_in_n", false)) {
        Check ch{"mean init error strictly decreasing in n", true, ""};
        std::vector<Index> ns = c.n_values;
        std::sort(ns.begin(), ns.end());
        for (Index d : c.d_values)
            for (std::size_t i = 1; i < ns.size(); ++i) {
                auto a = agg.find({d, ns[i - 1]}), b = agg.find({d, ns[i]});
                if (a == agg.end() || b == agg.end()) continue;
                if (!(b->second.mean() < a->second.mean())) {
                    ch.passed = false;
                    ch.detail += "d=" + std::to_string(d) + ": n=" + std::to_string(ns[i]) + " mean " +
                                 fmt(b->second.mean()) + " vs n=" + std::to_string(ns[i - 1]) + " mean " +
                                 fmt(a->second.mean()) + "; ";
                }
            }
        out.checks.push_back(ch);
    }
    if (th.contains("max_init_err")) {
        const double lim = th.at("max_init_err");
        double worst = 0.0;
        for (const auto& [k, a] : agg) {
            if (a.failures) worst = std::numeric_limits<double>::infinity();
            for (double e : a.errors) worst = std::max(worst, e);
        }
        out.checks.push_back({"init error bound", worst <= lim, "worst " + fmt(worst) + " <= " + fmt(lim)});
    }
    if (th.value("v_correct", false)) {
        bool all = true;
        for (const auto& [k, a] : agg) all = all && a.all_v_correct;
        out.checks.push_back({"v recovered in every trial", all, all ? "yes" : "some cell has an incorrect v"});
    }
    write_checks(c.output_dir, "init", out.checks);
    return out;
}

/// Trace of one approach in the convergence comparison.
struct ApproachTrace {
    std::string name;
    std::vector<double> objective;
    std::vector<double> rel_err;
    std::string error; ///< nonempty when the run diverged or failed
    /// First iteration whose objective is at most @p level, or -1.
    int first_below(double level) const {
        for (std::size_t i = 0; i < objective.size(); ++i)
            if (objective[i] <= level) return static_cast<int>(i);
        return -1;
    }
};

/// R^2 of a least-squares line through log(objective) over the last @p window entries.
inline double log_linear_r2(const std::vector<double>& objective, int window) {
    const int n = static_cast<int>(objective.size());
    if (n < window || window < 3) return std::numeric_limits<double>::quiet_NaN();
    Vector x(window), y(window);
    for (int i = 0; i < window; ++i) {
        x(i) = n - window + i;
        double o = objective[static_cast<std::size_t>(n - window + i)];
        if (!(o > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        y(i) = std::log(o);
    }
    const double mx = x.mean(), my = y.mean();
    const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
    const double sxx = (x.array() - mx).square().sum();
    const double syy = (y.array() - my).square().sum();
    if (syy == 0.0) return 1.0;
    return sxy * sxy / (sxx * syy);
}

struct ConvergenceOutcome : GridOutcome {
    std::vector<ApproachTrace> traces;
};

/**
 * @brief Fig. 1(c)-style comparison of three starting points on one data set.
 *
 * Uses the first d and n of the grid and trial 0: (I) tensor initialization
 * with v fixed, (II) random W and v with both trained, (III) random W with the
 * true v fixed. Each run stops after cfg.iters steps or once the objective
 * falls below cfg.objective_floor. Writes convergence.csv
 * (approach,iter,objective,rel_err) and convergence_summary.json.
 *
 * Threshold keys: "fastest_to" (approach I reaches this objective first),
 * "approach2_min_objective" (approach II ends at or above it), and "min_r2"
 * (log-linear fit of approaches I and III over the last cfg.fit_window steps).
 */
inline ConvergenceOutcome run_convergence_comparison(const ExperimentConfig& c) {
    using namespace harness_detail;
    c.validate();
    std::filesystem::create_directories(c.output_dir);
    const auto dir = std::filesystem::path(c.output_dir);
    const ActivationSpec act = activation_by_name(c.activation);
    const Index d = c.d_values.front(), n = c.n_values.front();
    const std::uint64_t seed = trial_seed(c.master_seed, d, n, 0);
    const TeacherNetwork t = generate_teacher(d, c.k, c.kappa, seed, act);
    const SampleSet S = sample(t, n, seed);

    const std::vector<std::pair<std::string, InitMode>> approaches{
        {"I", InitMode::Tensor}, {"II", InitMode::RandomWv}, {"III", InitMode::RandomWOracleV}};
    ConvergenceOutcome out;
    out.traces.resize(approaches.size());
    parallel_for(approaches.size(), worker_count(), [&](std::size_t a) {
        ApproachTrace& tr = out.traces[a];
        tr.name = approaches[a].first;
        try {
            auto [W, v] = starting_point(c, t, S, seed, approaches[a].second);
            const bool train_v = approaches[a].second == InitMode::RandomWv;
            const double eta = c.eta ? *c.eta : default_step(W, v, act.p);
            std::vector<double> hist;
            for (int q = 0; q <= c.iters; ++q) {
                const double obj = empirical_risk(W, v, S, act);
                tr.objective.push_back(obj);
                tr.rel_err.push_back(recovery_error(W, v, t).rel_err);
                if (!std::isfinite(obj) || (q >= 10 && obj > 10.0 * tr.objective[q - 10] && tr.objective[q - 10] > 0.0)) {
                    tr.error = "divergence at step " + std::to_string(q) + " with eta = " + fmt(eta);
                    break;
                }
                if (obj < c.objective_floor || q == c.iters) break;
                Matrix g = empirical_gradient(W, v, S, act);
                if (train_v) v -= eta * empirical_gradient_v(W, v, S, act);
                W -= eta * g;
            }
        } catch (const std::exception& e) {
            tr.error = error_tag(e) + ": " + e.what();
        }
    });

    {
        std::ofstream csv(dir / "convergence.csv");
        csv << "approach,iter,objective,rel_err\n";
        for (const auto& tr : out.traces)
            for (std::size_t i = 0; i < tr.objective.size(); ++i)
                csv << tr.name << ',' << i << ',' << fmt(tr.objective[i]) << ',' << fmt(tr.rel_err[i]) << '\n';
    }
    if (c.gnuplot) {
        std::ofstream dat(dir / "convergence.dat");
        for (const auto& tr : out.traces) {
            dat << "# approach " << tr.name << ": iter objective rel_err\n";
            for (std::size_t i = 0; i < tr.objective.size(); ++i)
                dat << i << ' ' << fmt(tr.objective[i]) << ' ' << fmt(tr.rel_err[i]) << '\n';
            dat << "\n\n";
        }
    }

    const auto& th = c.thresholds;
    const double fast = th.value("fastest_to", 1e-6);
    nlohmann::json summary = {{"d", d}, {"n", n}, {"seed", seed}, {"approaches", nlohmann::json::array()}};
    for (const auto& tr : out.traces)
        summary["approaches"].push_back({{"approach", tr.name},
                                         {"iterations", tr.objective.empty() ? 0 : tr.objective.size() - 1},
                                         {"final_objective", tr.objective.empty() ? nlohmann::json(nullptr) : nlohmann::json(tr.objective.back())},
                                         {"final_rel_err", tr.rel_err.empty() ? nlohmann::json(nullptr) : nlohmann::json(tr.rel_err.back())},
                                         {"first_below_fastest_to", tr.first_below(fast)},
                                         {"log_linear_r2", log_linear_r2(tr.objective, c.fit_window)},
                                         {"error", tr.error}});
    std::ofstream(dir / "convergence_summary.json") << summary.dump(2) << '\n';

    const ApproachTrace &I = out.traces[0], &II = out.traces[1], &III = out.traces[2];
    if (th.contains("fastest_to")) {
        const int a = I.first_below(fast), b = II.first_below(fast), e = III.first_below(fast);
        const bool ok = a >= 0 && (b < 0 || a < b) && (e < 0 || a < e);
        out.checks.push_back({"approach I fastest to " + fmt(fast), ok,
                              "first iterations I/II/III = " + std::to_string(a) + "/" + std::to_string(b) + "/" +
                                  std::to_string(e)});
    }
    if (th.contains("approach2_min_objective")) {
        const double lim = th.at("approach2_min_objective");
        const double fin = II.objective.empty() ? std::numeric_limits<double>::infinity() : II.objective.back();
        const bool ok = !(fin < lim);
        out.checks.push_back({"approach II does not reach " + fmt(lim), ok, "final objective " + fmt(fin)});
    }
    if (th.contains("min_r2")) {
        const double lim = th.at("min_r2");
        for (const ApproachTrace* tr : {&I, &III}) {
            const double r2 = log_linear_r2(tr->objective, c.fit_window);
            out.checks.push_back({"approach " + tr->name + " log-linear R^2", r2 >= lim,
                                  "R^2 " + fmt(r2) + " >= " + fmt(lim) + " over last " + std::to_string(c.fit_window) + " iterations"});
        }
    }
    write_checks(c.output_dir, "convergence", out.checks);
    return out;
}

} // namespace nnrecover

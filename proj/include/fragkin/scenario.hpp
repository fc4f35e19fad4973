#pragma once

// JSON scenario configs and the task runners behind the command-line tool.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fragkin/asymptotics.hpp"
#include "fragkin/tower.hpp"

namespace fragkin {

enum class Task { Simulate, MassBalance, CheckWeights, Decay, Monomer, EigenDemo, TowerDemo };

inline const std::vector<std::pair<Task, std::string>>& task_names() {
    static const std::vector<std::pair<Task, std::string>> names = {
        {Task::Simulate, "simulate"},   {Task::MassBalance, "mass-balance"}, {Task::CheckWeights, "check-weights"},
        {Task::Decay, "decay"},         {Task::Monomer, "monomer"},          {Task::EigenDemo, "eigen-demo"},
        {Task::TowerDemo, "tower-demo"}};
    return names;
}

inline std::string to_string(Task task) {
    for (const auto& [t, name] : task_names()) {
        if (t == task) return name;
    }
    return "unknown";
}

inline Task parse_task(const std::string& name) {
    for (const auto& [t, n] : task_names()) {
        if (n == name) return t;
    }
    fail(ErrorCode::ConfigInvalid, "unknown task '" + name + "'");
}

struct InitialSpec {
    std::string kind = "basis";   // basis | vector | profile
    Index basis = 1;
    std::vector<double> vector;
    std::string profile;          // uniform | inverse_weight
    Index length = 0;
};

struct ScenarioConfig {
    std::optional<Task> task;
    FragmentationModel model = FragmentationModel::random_scission();
    Weight weight = Weight::power(1.0);
    InitialSpec initial;
    std::vector<double> times;
    EvolveOptions truncation;
    Index j_max = 64;
    double mass_tol = kDefaultMassTol;
    std::vector<double> lambdas = {1.0};
    Index dim = 1000;
    double mu = 1.0;
    Index n_check = 100;
};

namespace detail {

inline const json& field(const json& obj, const std::string& key, const std::string& where) {
    require(obj.contains(key), ErrorCode::ConfigInvalid, where + ": missing '" + key + "'");
    return obj.at(key);
}

inline void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    require(obj.is_object(), ErrorCode::ConfigInvalid, where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        require(ok, ErrorCode::ConfigInvalid, where + ": unknown key '" + key + "'");
    }
}

inline double number(const json& v, const std::string& where) {
    require(v.is_number(), ErrorCode::ConfigInvalid, where + ": expected a number");
    return v.get<double>();
}

inline Index count(const json& v, const std::string& where) {
    require(v.is_number_unsigned(), ErrorCode::ConfigInvalid, where + ": expected a non-negative integer");
    return v.get<Index>();
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
    require(v.is_array(), ErrorCode::ConfigInvalid, where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number(x, where));
    return out;
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::ConfigInvalid, "cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigInvalid, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

/// Re-raises library parameter errors from config-derived values as ConfigInvalid.
template <class Fn>
auto as_config(const std::string& where, Fn fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InvalidParameter && e.code() != ErrorCode::LengthMismatch) throw;
        fail(ErrorCode::ConfigInvalid, where + ": " + e.what());
    }
}

inline FragmentationModel parse_model(const json& doc, const std::filesystem::path& base) {
    require(doc.is_object(), ErrorCode::ConfigInvalid, "model: expected an object");
    const auto& kind_v = field(doc, "kind", "model");
    require(kind_v.is_string(), ErrorCode::ConfigInvalid, "model: 'kind' must be a string");
    const auto kind = kind_v.get<std::string>();
    if (kind == "random_scission") {
        only_keys(doc, {"kind"}, "model");
        return FragmentationModel::random_scission();
    }
    if (kind == "binary_chip_off") {
        only_keys(doc, {"kind"}, "model");
        return FragmentationModel::binary_chip_off();
    }
    if (kind == "uniform_binary") {
        only_keys(doc, {"kind", "gamma", "a1"}, "model");
        const double gamma = number(field(doc, "gamma", "model"), "model.gamma");
        const double a1 = doc.contains("a1") ? number(doc.at("a1"), "model.a1") : 0.0;
        return as_config("model", [&] { return FragmentationModel::uniform_binary(gamma, a1); });
    }
    if (kind == "table") {
        if (doc.contains("path")) {
            only_keys(doc, {"kind", "path"}, "model");
            require(doc.at("path").is_string(), ErrorCode::ConfigInvalid, "model.path must be a string");
            const auto path = base / doc.at("path").get<std::string>();
            const auto table = read_json(path);
            return as_config("model table '" + path.string() + "'",
                             [&] { return FragmentationModel::table_from_json(table); });
        }
        only_keys(doc, {"kind", "a", "b", "j_max"}, "model");
        json table = doc;
        table.erase("kind");
        return as_config("model", [&] { return FragmentationModel::table_from_json(table); });
    }
    fail(ErrorCode::ConfigInvalid, "model: unknown kind '" + kind + "'");
}

inline InitialSpec parse_initial(const json& doc) {
    require(doc.is_object() && doc.size() >= 1, ErrorCode::ConfigInvalid, "initial: expected an object");
    InitialSpec spec;
    if (doc.contains("basis")) {
        only_keys(doc, {"basis", "length"}, "initial");
        spec.kind = "basis";
        spec.basis = count(doc.at("basis"), "initial.basis");
        require(spec.basis >= 1, ErrorCode::ConfigInvalid, "initial.basis must be >= 1");
    } else if (doc.contains("vector")) {
        only_keys(doc, {"vector"}, "initial");
        spec.kind = "vector";
        spec.vector = numbers(doc.at("vector"), "initial.vector");
        require(!spec.vector.empty(), ErrorCode::ConfigInvalid, "initial.vector must not be empty");
    } else if (doc.contains("profile")) {
        only_keys(doc, {"profile", "length"}, "initial");
        spec.kind = "profile";
        require(doc.at("profile").is_string(), ErrorCode::ConfigInvalid, "initial.profile must be a string");
        spec.profile = doc.at("profile").get<std::string>();
        require(spec.profile == "uniform" || spec.profile == "inverse_weight", ErrorCode::ConfigInvalid,
                "initial.profile must be 'uniform' or 'inverse_weight'");
    } else {
        fail(ErrorCode::ConfigInvalid, "initial: one of 'basis', 'vector' or 'profile' is required");
    }
    if (doc.contains("length")) spec.length = count(doc.at("length"), "initial.length");
    require(spec.kind != "profile" || spec.length >= 1, ErrorCode::ConfigInvalid, "initial.profile needs 'length' >= 1");
    return spec;
}

} // namespace detail

/// Schema: task?, model, weight, initial, times, truncation{N_start, N_max, tol},
/// j_max, tol, lambda (number or array), N, mu, n_check. Unknown keys are errors.
inline ScenarioConfig parse_scenario(const json& doc, const std::filesystem::path& base = ".") {
    using namespace detail;
    only_keys(doc,
              {"task", "model", "weight", "initial", "times", "truncation", "j_max", "tol", "lambda", "N", "mu",
               "n_check", "description"},
              "config");
    ScenarioConfig cfg;
    if (doc.contains("task")) {
        require(doc.at("task").is_string(), ErrorCode::ConfigInvalid, "config.task must be a string");
        cfg.task = parse_task(doc.at("task").get<std::string>());
    }
    if (doc.contains("model")) cfg.model = parse_model(doc.at("model"), base);
    if (doc.contains("weight")) cfg.weight = as_config("weight", [&] { return Weight::from_json(doc.at("weight")); });
    if (doc.contains("initial")) cfg.initial = parse_initial(doc.at("initial"));
    if (doc.contains("times")) {
        cfg.times = numbers(doc.at("times"), "times");
        for (std::size_t i = 0; i < cfg.times.size(); ++i) {
            require(cfg.times[i] >= 0.0, ErrorCode::ConfigInvalid, "times must be >= 0");
            require(i == 0 || cfg.times[i] > cfg.times[i - 1], ErrorCode::ConfigInvalid,
                    "times must be strictly increasing");
        }
    }
    if (doc.contains("truncation")) {
        const auto& tr = doc.at("truncation");
        only_keys(tr, {"N_start", "N_max", "tol"}, "truncation");
        if (tr.contains("N_start")) cfg.truncation.n_start = count(tr.at("N_start"), "truncation.N_start");
        if (tr.contains("N_max")) cfg.truncation.n_max = count(tr.at("N_max"), "truncation.N_max");
        if (tr.contains("tol")) cfg.truncation.tol = number(tr.at("tol"), "truncation.tol");
        require(cfg.truncation.tol > 0.0, ErrorCode::ConfigInvalid, "truncation.tol must be > 0");
        require(cfg.truncation.n_max >= 1, ErrorCode::ConfigInvalid, "truncation.N_max must be >= 1");
        require(cfg.truncation.n_start <= cfg.truncation.n_max, ErrorCode::ConfigInvalid,
                "truncation.N_start must not exceed N_max");
    }
    if (doc.contains("j_max")) cfg.j_max = count(doc.at("j_max"), "j_max");
    require(cfg.j_max >= 2, ErrorCode::ConfigInvalid, "j_max must be >= 2");
    if (doc.contains("tol")) cfg.mass_tol = number(doc.at("tol"), "tol");
    require(cfg.mass_tol > 0.0, ErrorCode::ConfigInvalid, "tol must be > 0");
    if (doc.contains("lambda")) {
        const auto& l = doc.at("lambda");
        cfg.lambdas = l.is_array() ? numbers(l, "lambda") : std::vector<double>{number(l, "lambda")};
        require(!cfg.lambdas.empty(), ErrorCode::ConfigInvalid, "lambda must not be empty");
        for (double v : cfg.lambdas) require(v > 0.0, ErrorCode::ConfigInvalid, "lambda values must be > 0");
    }
    if (doc.contains("N")) cfg.dim = count(doc.at("N"), "N");
    require(cfg.dim >= 2, ErrorCode::ConfigInvalid, "N must be >= 2");
    if (doc.contains("mu")) cfg.mu = number(doc.at("mu"), "mu");
    require(cfg.mu > 0.0, ErrorCode::ConfigInvalid, "mu must be > 0");
    if (doc.contains("n_check")) cfg.n_check = count(doc.at("n_check"), "n_check");
    require(cfg.n_check >= 1, ErrorCode::ConfigInvalid, "n_check must be >= 1");
    return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    return parse_scenario(detail::read_json(path), path.parent_path());
}

inline StateVector initial_state(const ScenarioConfig& cfg) {
    const auto& init = cfg.initial;
    if (init.kind == "basis") return StateVector::basis(init.basis, cfg.weight, init.length);
    if (init.kind == "vector") return StateVector(init.vector, cfg.weight);
    std::vector<double> v(init.length);
    for (Index n = 1; n <= init.length; ++n) {
        v[n - 1] = init.profile == "uniform" ? 1.0 : 1.0 / (cfg.weight(n) * static_cast<double>(n));
    }
    return StateVector(std::move(v), cfg.weight);
}

// --- running ----------------------------------------------------------------

struct RunOptions {
    std::filesystem::path out_dir = ".";
    bool quiet = false;
    bool summary = false;
    unsigned threads = 1;
    std::ostream* progress = &std::cerr;
    std::ostream* report = &std::cout;
};

enum ExitStatus : int { kExitOk = 0, kExitFailure = 1, kExitEnvelope = 2 };

/// FRAGKIN_THREADS caps the worker count; unset means hardware concurrency.
inline unsigned thread_cap(const char* env) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (env == nullptr || *env == '\0') return hw;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, ErrorCode::ConfigInvalid,
            std::string("FRAGKIN_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(std::min<long>(v, 1024));
}

/// kExitEnvelope when a sampled bound or sandwich inequality fails.
inline int envelope_status(const DecayReport& report) {
    return report.envelope_ok && report.sandwich_ok ? kExitOk : kExitEnvelope;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::ConfigInvalid, "cannot write '" + path.string() + "'");
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

inline void progress(const RunOptions& opts, const std::string& line) {
    if (!opts.quiet && opts.progress) *opts.progress << "fragkin: " << line << '\n';
}

inline void require_times(const ScenarioConfig& cfg, Task task) {
    require(!cfg.times.empty(), ErrorCode::ConfigInvalid, to_string(task) + " needs a non-empty 'times' list");
}

/// Fixed-width summary table.
class Table {
public:
    explicit Table(std::vector<std::string> header) : rows_{std::move(header)} {}
    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    void print(std::ostream& out) const {
        std::vector<std::size_t> width(rows_.front().size(), 0);
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
        }
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            for (std::size_t i = 0; i < rows_[k].size(); ++i) {
                out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << rows_[k][i];
            }
            out << '\n';
            if (k == 0) {
                for (std::size_t i = 0; i < width.size(); ++i) out << (i ? "  " : "") << std::string(width[i], '-');
                out << '\n';
            }
        }
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline int run_simulate(const ScenarioConfig& cfg, const RunOptions& opts) {
    require_times(cfg, Task::Simulate);
    const auto u0 = initial_state(cfg);
    std::vector<std::pair<double, StateVector>> frames;
    json steps = json::array();
    Table table({"t", "N", "method", "weighted_norm", "M1"});
    for (double t : cfg.times) {
        progress(opts, "evolving to t=" + fmt17(t));
        const auto r = evolve(cfg.model, cfg.weight, u0, t, cfg.truncation);
        steps.push_back({{"t", t}, {"truncation", r.truncation}, {"last_increment", r.last_increment},
                         {"method", to_string(r.method)}, {"most_negative", r.most_negative},
                         {"weighted_norm", wnorm(r.state)}, {"M1", moment_M1(r.state)}});
        table.row({cell(t), std::to_string(r.truncation), to_string(r.method), cell(wnorm(r.state)),
                   cell(moment_M1(r.state))});
        frames.emplace_back(t, r.state);
    }
    std::ostringstream csv;
    write_trajectory_csv(csv, frames);
    write_text(opts.out_dir / "trajectory.csv", csv.str());
    write_json(opts.out_dir / "simulate.json",
               {{"model", cfg.model.describe()}, {"weight", cfg.weight.describe()}, {"steps", steps}});
    if (opts.summary) table.print(*opts.report);
    return kExitOk;
}

inline int run_mass_balance(const ScenarioConfig& cfg, const RunOptions& opts) {
    progress(opts, "mass balance on j <= " + std::to_string(cfg.j_max));
    const auto report = mass_balance(cfg.model, cfg.j_max, cfg.mass_tol);
    auto doc = report.to_json();
    doc["model"] = cfg.model.describe();
    doc["domain_diagnostic"] = domain_equality_diagnostic(cfg.model, cfg.j_max).to_json();
    write_json(opts.out_dir / "mass_balance.json", doc);
    if (opts.summary) {
        Table table({"model", "a1", "conserving_global", "mass_nonincreasing"});
        table.row({cfg.model.describe(), cell(report.a1), report.conserving_global ? "true" : "false",
                   report.nonincreasing ? "true" : "false"});
        table.print(*opts.report);
    }
    return kExitOk;
}

inline int run_check_weights(const ScenarioConfig& cfg, const RunOptions& opts) {
    progress(opts, "kappa ratios on j <= " + std::to_string(cfg.j_max));
    const auto report = kappa(cfg.model, cfg.weight, cfg.j_max);
    auto doc = report.to_json();
    doc["model"] = cfg.model.describe();
    doc["weight"] = cfg.weight.describe();
    write_json(opts.out_dir / "kappa.json", doc);
    if (opts.summary) {
        Table table({"sup_checked", "exact_sup", "argsup", "certificate", "verdict"});
        table.row({cell(report.sup_checked), report.exact_sup ? report.exact_sup->str() : "-",
                   std::to_string(report.argsup), report.analytic_sup ? cell(*report.analytic_sup) : "-",
                   to_string(report.verdict)});
        table.print(*opts.report);
    }
    return kExitOk;
}

inline void envelope_summary(const DecayReport& report, std::ostream& out) {
    Table table({"t", "measured", "bound", "ratio"});
    for (const auto& s : report.samples) table.row({cell(s.t), cell(s.measured), cell(s.bound), cell(s.ratio())});
    table.print(out);
    out << "predicted_rate " << cell(report.predicted_rate) << "  fitted_rate "
        << (report.fitted_rate ? cell(*report.fitted_rate) : std::string("-")) << "  envelope "
        << (report.envelope_ok ? "ok" : "VIOLATED") << '\n';
}

inline int run_envelope(const ScenarioConfig& cfg, const RunOptions& opts, bool monomer) {
    const Task task = monomer ? Task::Monomer : Task::Decay;
    require_times(cfg, task);
    const auto u0 = initial_state(cfg);
    const auto kr = kappa(cfg.model, cfg.weight, cfg.j_max);
    DecayOptions dopts;
    dopts.evolve = cfg.truncation;
    dopts.threads = opts.threads;
    progress(opts, std::string(monomer ? "monomer" : "decay") + " envelope at " + std::to_string(cfg.times.size()) +
                       " times");
    const auto report = monomer ? check_monomer_convergence(cfg.model, cfg.weight, kr, u0, cfg.times, dopts)
                                : check_decay_bound(cfg.model, cfg.weight, kr, u0, cfg.times, dopts);
    auto doc = report.to_json();
    doc["model"] = cfg.model.describe();
    doc["weight"] = cfg.weight.describe();
    doc["kappa_certificate"] = *kr.certificate;
    const std::string stem = monomer ? "monomer" : "decay";
    write_json(opts.out_dir / (stem + ".json"), doc);
    std::ostringstream csv;
    report.write_csv(csv);
    write_text(opts.out_dir / (stem + ".csv"), csv.str());
    if (opts.summary) envelope_summary(report, *opts.report);
    const int status = envelope_status(report);
    if (status != kExitOk) progress(opts, "envelope violated");
    return status;
}

inline int run_eigen_demo(const ScenarioConfig& cfg, const RunOptions& opts) {
    require(cfg.n_check <= cfg.dim, ErrorCode::ConfigInvalid, "n_check must not exceed N");
    const double t = cfg.times.empty() ? 1.0 : cfg.times.back();
    json pairs = json::array();
    Table table({"lambda", "residual", "residual_no_tail", "G1_limit", "norm_gap/||g||"});
    for (double lambda : cfg.lambdas) {
        progress(opts, "eigenvector lambda=" + fmt17(lambda));
        const auto pair = eigenpair(lambda, cfg.dim);
        const auto dom = domain_G1_check(pair, cfg.dim);
        const auto demo = nonuniqueness_demo(lambda, t, cfg.dim, cfg.truncation.integrator);
        const double with_tail = eigen_residual(pair, cfg.n_check, true);
        const double without_tail = eigen_residual(pair, cfg.n_check, false);
        pairs.push_back({{"lambda", lambda},
                         {"g_head", std::vector<double>(pair.g.begin(), pair.g.begin() + std::min<Index>(4, cfg.dim))},
                         {"tail_at_1", pair.tail(1)},
                         {"residual", with_tail},
                         {"residual_without_tail", without_tail},
                         {"domain_G1", dom.to_json()},
                         {"nonuniqueness", demo.to_json()}});
        table.row({cell(lambda), cell(with_tail), cell(without_tail), cell(dom.limit_estimate), cell(demo.margin())});
    }
    write_json(opts.out_dir / "eigen.json", {{"N", cfg.dim}, {"n_check", cfg.n_check}, {"t", t}, {"pairs", pairs}});
    if (opts.summary) table.print(*opts.report);
    return kExitOk;
}

inline int run_tower_demo(const ScenarioConfig& cfg, const RunOptions& opts) {
    require_times(cfg, Task::TowerDemo);
    const auto f = initial_state(cfg);
    require(f.size() <= cfg.dim, ErrorCode::ConfigInvalid, "initial data longer than N");
    progress(opts, "tower norms on N=" + std::to_string(cfg.dim));
    const TowerContext ctx(cfg.model, cfg.weight, cfg.dim, cfg.mu);
    const auto rows = smoothing_demo(ctx, f, cfg.times, cfg.truncation.integrator);
    std::ostringstream csv;
    write_tower_csv(csv, rows);
    write_text(opts.out_dir / "tower.csv", csv.str());
    json initial = json::object();
    for (int order = -2; order <= 2; ++order) initial[std::to_string(order)] = sobolev_norm(ctx, f, order);
    write_json(opts.out_dir / "tower.json", {{"N", cfg.dim},
                                             {"mu", cfg.mu},
                                             {"norms", "truncated tower norms"},
                                             {"initial_norms", initial},
                                             {"inverse_operator_norm", inverse_operator_norm(ctx)}});
    if (opts.summary) {
        Table table({"t", "order", "norm"});
        for (const auto& r : rows) table.row({cell(r.t), std::to_string(r.order), cell(r.norm)});
        table.print(*opts.report);
    }
    return kExitOk;
}

} // namespace detail

/// Runs one task and writes its artifacts; returns the process exit status
/// for envelope outcomes. Errors propagate as fragkin::Error.
inline int run_scenario(Task task, const ScenarioConfig& cfg, const RunOptions& opts) {
    require(!cfg.task || *cfg.task == task, ErrorCode::ConfigInvalid,
            "config task '" + to_string(*cfg.task) + "' does not match subcommand '" + to_string(task) + "'");
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    require(!ec, ErrorCode::ConfigInvalid, "cannot create output directory '" + opts.out_dir.string() + "'");
    switch (task) {
    case Task::Simulate: return detail::run_simulate(cfg, opts);
    case Task::MassBalance: return detail::run_mass_balance(cfg, opts);
    case Task::CheckWeights: return detail::run_check_weights(cfg, opts);
    case Task::Decay: return detail::run_envelope(cfg, opts, false);
    case Task::Monomer: return detail::run_envelope(cfg, opts, true);
    case Task::EigenDemo: return detail::run_eigen_demo(cfg, opts);
    case Task::TowerDemo: return detail::run_tower_demo(cfg, opts);
    }
    return kExitFailure;
}

/// One-line stderr diagnostic per error category.
inline std::string diagnose(const Error& e) {
    std::string hint;
    switch (e.code()) {
    case ErrorCode::ConfigInvalid: hint = "fix the scenario file"; break;
    case ErrorCode::TruncationNotConverged: hint = "raise truncation.N_max or loosen truncation.tol"; break;
    case ErrorCode::AssumptionNotCertified: hint = "the model/weight pair has no kappa < 1 certificate"; break;
    case ErrorCode::NotMassConserving: hint = "monomer convergence needs a mass-conserving model"; break;
    case ErrorCode::ToleranceNotMet: hint = "the integrator could not meet its tolerance"; break;
    default: hint = "invalid input"; break;
    }
    return std::string("fragkin: error: ") + e.what() + " (" + hint + ")";
}

} // namespace fragkin

#pragma once

// Long-time behaviour: decay to zero when mass is lost, convergence to the
// monomer state M_1(u0) e_1 when mass is conserved, and the exponential
// envelopes exp(-(1-kappa) a0 t) and (w_1+1) exp(-(1-kappa) a0_hat t).

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fragkin/evolution.hpp"

namespace fragkin {

inline constexpr double kEnvelopeSlack = 1e-6;
inline constexpr double kZeroThreshold = 1e-6;

/// Time by which "converges to zero" is checked: 20 / max(rate, 0.1).
inline double convergence_horizon(double predicted_rate) { return 20.0 / std::max(predicted_rate, 0.1); }

struct RateInfima {
    double a0 = 0.0;       // min over [1, n_max]
    double a0_hat = 0.0;   // min over [2, n_max]
    Index n_max = 2;
    bool certified = false;  // true when the finite minimum is the infimum over all n

    json to_json() const {
        return {{"a0", a0}, {"a0_hat", a0_hat}, {"n_range", {1, n_max}}, {"certified", certified}};
    }
};

inline RateInfima infimum_rates(const FragmentationModel& model, Index n_max) {
    require(n_max >= 2, ErrorCode::InvalidParameter, "infimum_rates: n_max must be >= 2");
    RateInfima r;
    r.n_max = n_max;
    r.a0 = model.a(1);
    r.a0_hat = std::numeric_limits<double>::infinity();
    for (Index n = 2; n <= n_max; ++n) {
        const double an = model.a(n);
        r.a0 = std::min(r.a0, an);
        r.a0_hat = std::min(r.a0_hat, an);
    }
    const auto domain = model.max_index();
    r.certified = domain ? n_max >= *domain : model.monotone_rates_from_two();
    return r;
}

/// Negated slope of the least-squares line through (t, ln value).
inline double fit_decay_rate(std::span<const std::pair<double, double>> samples) {
    require(samples.size() >= 2, ErrorCode::InvalidParameter, "fit_decay_rate: need at least 2 samples");
    double mean_t = 0.0, mean_y = 0.0;
    for (const auto& [t, v] : samples) {
        require(v > 0.0 && std::isfinite(v), ErrorCode::InvalidParameter, "fit_decay_rate: values must be > 0");
        mean_t += t;
        mean_y += std::log(v);
    }
    const double count = static_cast<double>(samples.size());
    mean_t /= count;
    mean_y /= count;
    double stt = 0.0, sty = 0.0;
    for (const auto& [t, v] : samples) {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (std::log(v) - mean_y);
    }
    require(stt > 0.0, ErrorCode::DegenerateFit, "fit_decay_rate: all sample times are equal");
    return -sty / stt;
}

struct EnvelopeSample {
    double t = 0.0;
    double measured = 0.0;
    double bound = 0.0;

    double ratio() const { return bound > 0.0 ? measured / bound : (measured == 0.0 ? 0.0 : INFINITY); }
};

/// Two-sided comparison with the reduced system at one time.
struct SandwichSample {
    double t = 0.0;
    double lower = 0.0;     // ||S_22(t) u0~||_Y
    double measured = 0.0;  // ||S(t) u0 - M_1 e_1||_w
    double upper = 0.0;     // (w_1 + 1) ||S_22(t) u0~||_Y
    bool ok = false;
};

struct DecayReport {
    std::string kind;         // "decay" or "monomer"
    double a0 = 0.0;
    double a0_hat = 0.0;
    bool rates_certified = false;
    double kappa = 0.0;
    double prefactor = 1.0;   // 1 for decay, w_1 + 1 for monomer
    double predicted_rate = 0.0;
    std::optional<double> fitted_rate;
    double initial_norm = 0.0;
    bool envelope_ok = true;
    std::vector<EnvelopeSample> samples;
    std::vector<SandwichSample> sandwich;
    bool sandwich_ok = true;

    json to_json() const {
        json rows = json::array();
        for (const auto& s : samples) {
            rows.push_back({{"t", s.t}, {"measured", s.measured}, {"bound", s.bound}, {"ratio", s.ratio()}});
        }
        json out = {{"kind", kind},
                    {"a0", a0},
                    {"a0_hat", a0_hat},
                    {"rates_certified", rates_certified},
                    {"kappa", kappa},
                    {"prefactor", prefactor},
                    {"predicted_rate", predicted_rate},
                    {"fitted_rate", fitted_rate ? json(*fitted_rate) : json(nullptr)},
                    {"initial_norm", initial_norm},
                    {"envelope_ok", envelope_ok},
                    {"envelope_slack", kEnvelopeSlack},
                    {"samples", rows}};
        if (!sandwich.empty()) {
            json sw = json::array();
            for (const auto& s : sandwich) {
                sw.push_back({{"t", s.t}, {"lower", s.lower}, {"measured", s.measured}, {"upper", s.upper}, {"ok", s.ok}});
            }
            out["sandwich"] = sw;
            out["sandwich_ok"] = sandwich_ok;
        }
        return out;
    }

    /// CSV `t,measured,bound,ratio`.
    void write_csv(std::ostream& out) const {
        out << "t,measured,bound,ratio\n";
        for (const auto& s : samples) {
            out << fmt17(s.t) << ',' << fmt17(s.measured) << ',' << fmt17(s.bound) << ',' << fmt17(s.ratio()) << '\n';
        }
    }
};

struct DecayOptions {
    EvolveOptions evolve;
    Index rate_range = 64;   // infima are taken over [1, max(support, rate_range)]
    unsigned threads = 1;    // time samples evaluated concurrently
};

namespace detail {

/// fn(times[i]) for every i; results in input order regardless of thread count.
template <class Fn>
auto map_times(const std::vector<double>& times, unsigned threads, Fn fn) {
    using R = decltype(fn(0.0));
    std::vector<R> out;
    out.reserve(times.size());
    if (threads <= 1) {
        for (double t : times) out.push_back(fn(t));
        return out;
    }
    for (std::size_t begin = 0; begin < times.size(); begin += threads) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = begin; i < std::min(times.size(), begin + threads); ++i) {
            batch.push_back(std::async(std::launch::async, fn, times[i]));
        }
        for (auto& f : batch) out.push_back(f.get());
    }
    return out;
}

inline void validate_times(const std::vector<double>& times) {
    require(!times.empty(), ErrorCode::InvalidParameter, "at least one sample time is required");
    for (double t : times) require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidParameter, "sample times must be >= 0");
}

inline Index rate_range(const FragmentationModel& model, const StateVector& u0, Index requested) {
    Index n = std::max<Index>({u0.support(), requested, 2});
    if (const auto domain = model.max_index()) n = std::min(n, *domain);
    require(n >= 2, ErrorCode::InvalidParameter, "model range too small to take infima");
    return n;
}

inline std::optional<double> fit_positive(const std::vector<EnvelopeSample>& samples) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : samples) {
        if (s.measured > 0.0) pts.emplace_back(s.t, s.measured);
    }
    if (pts.size() < 2) return std::nullopt;
    try {
        return fit_decay_rate(pts);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline void require_strict(const KappaReport& kr) {
    require(kr.verdict == KappaVerdict::Strict, ErrorCode::AssumptionNotCertified,
            "kappa < 1 is not certified (verdict " + to_string(kr.verdict) + ", sup over [2, " +
                std::to_string(kr.j_last) + "] = " + json(kr.sup_checked).dump() + ")");
}

} // namespace detail

/// ||S(t) u0||_w against exp(-(1-kappa) a0 t) ||u0||_w.
inline DecayReport check_decay_bound(const FragmentationModel& model, const Weight& weight, const KappaReport& kr,
                                     const StateVector& u0, const std::vector<double>& times,
                                     const DecayOptions& opts = {}) {
    detail::require_strict(kr);
    detail::validate_times(times);
    require(u0.nonnegative(), ErrorCode::InvalidParameter, "check_decay_bound: u0 must be nonnegative");

    const auto inf = infimum_rates(model, detail::rate_range(model, u0, opts.rate_range));
    DecayReport report;
    report.kind = "decay";
    report.a0 = inf.a0;
    report.a0_hat = inf.a0_hat;
    report.rates_certified = inf.certified;
    report.kappa = kr.certified_kappa();
    report.predicted_rate = (1.0 - report.kappa) * inf.a0;
    report.initial_norm = weighted_norm(u0.coeffs(), weight);

    report.samples = detail::map_times(times, opts.threads, [&](double t) {
        const auto r = evolve(model, weight, u0, t, opts.evolve);
        return EnvelopeSample{t, wnorm(r.state), std::exp(-report.predicted_rate * t) * report.initial_norm};
    });
    for (const auto& s : report.samples) report.envelope_ok = report.envelope_ok && s.measured <= s.bound * (1.0 + kEnvelopeSlack);
    report.fitted_rate = detail::fit_positive(report.samples);
    return report;
}

/// ||S(t) u0 - M_1(u0) e_1||_w against (w_1+1) exp(-(1-kappa) a0_hat t) ||u0||_w,
/// together with the two-sided comparison against the reduced system.
inline DecayReport check_monomer_convergence(const FragmentationModel& model, const Weight& weight,
                                             const KappaReport& kr, const StateVector& u0,
                                             const std::vector<double>& times, const DecayOptions& opts = {}) {
    detail::validate_times(times);
    require(u0.nonnegative(), ErrorCode::InvalidParameter, "check_monomer_convergence: u0 must be nonnegative");
    const Index range = detail::rate_range(model, u0, opts.rate_range);
    const auto balance = mass_balance(model, range);
    require(balance.conserving_global, ErrorCode::NotMassConserving,
            "a_1 = " + json(balance.a1).dump() + " and lambda_j on [2, " + std::to_string(range) +
                "] do not vanish within " + json(balance.tol).dump());
    detail::require_strict(kr);

    const auto inf = infimum_rates(model, range);
    DecayReport report;
    report.kind = "monomer";
    report.a0 = inf.a0;
    report.a0_hat = inf.a0_hat;
    report.rates_certified = inf.certified;
    report.kappa = kr.certified_kappa();
    report.prefactor = weight(1) + 1.0;
    report.predicted_rate = (1.0 - report.kappa) * inf.a0_hat;
    report.initial_norm = weighted_norm(u0.coeffs(), weight);

    const double mass = moment_M1(u0);
    const auto reduced_model = model.shifted(1);
    const auto reduced_weight = weight.shifted(1);
    std::vector<double> tail(u0.coeffs().begin() + std::min<std::ptrdiff_t>(1, u0.size()), u0.coeffs().end());
    const StateVector reduced_u0(tail.empty() ? std::vector<double>{0.0} : tail, reduced_weight);
    const double floor = 1e-12 * std::max(report.initial_norm, 1.0);

    struct Pair {
        EnvelopeSample env;
        SandwichSample sw;
    };
    const auto rows = detail::map_times(times, opts.threads, [&](double t) {
        const auto full = evolve(model, weight, u0, t, opts.evolve);
        auto coeffs = full.state.coeffs();
        coeffs[0] -= mass;
        const double measured = weighted_norm(coeffs, weight);
        const double lower = wnorm(evolve(reduced_model, reduced_weight, reduced_u0, t, opts.evolve).state);
        SandwichSample sw{t, lower, measured, report.prefactor * lower, false};
        sw.ok = lower <= measured * (1.0 + kEnvelopeSlack) + floor &&
                measured <= sw.upper * (1.0 + kEnvelopeSlack) + floor;
        const double bound = report.prefactor * std::exp(-report.predicted_rate * t) * report.initial_norm;
        return Pair{EnvelopeSample{t, measured, bound}, sw};
    });
    for (const auto& r : rows) {
        report.samples.push_back(r.env);
        report.sandwich.push_back(r.sw);
        report.envelope_ok = report.envelope_ok && r.env.measured <= r.env.bound * (1.0 + kEnvelopeSlack);
        report.sandwich_ok = report.sandwich_ok && r.sw.ok;
    }
    report.fitted_rate = detail::fit_positive(report.samples);
    return report;
}

/// The reduced system: a_hat_n = a_{n+1}, b_hat_{n,j} = b_{n+1,j+1}, w_hat_n = w_{n+1}.
struct ReducedModel {
    FragmentationModel model;
    Weight weight;
};

inline ReducedModel reduced_model(const FragmentationModel& model, const Weight& weight) {
    return {model.shifted(1), weight.shifted(1)};
}

/// e^{alpha t} ||S(t) e_n||_w at each sample time; grows without bound when alpha > a_n.
inline std::vector<double> exceedance_profile(const FragmentationModel& model, const Weight& weight, Index n,
                                              double alpha, const std::vector<double>& times,
                                              const EvolveOptions& opts = {}) {
    detail::validate_times(times);
    std::vector<double> out;
    for (double t : times) {
        out.push_back(std::exp(alpha * t) * wnorm(evolve(model, weight, StateVector::basis(n, weight), t, opts).state));
    }
    return out;
}

struct LimitCheck {
    Index n = 1;
    double rate = 0.0;       // a_n
    double horizon = 0.0;
    double ratio = 0.0;      // distance to the limit at the horizon, relative to ||e_n||_w
    double component = 0.0; // component n of the evolved state at the horizon
    bool converged = false;  // ratio < kZeroThreshold
};

struct DichotomyReport {
    std::string limit;           // "zero" or "monomer"
    bool rates_positive = true;  // a_n > 0 on the checked indices (n >= 2 for the monomer limit)
    double horizon = 0.0;
    std::vector<LimitCheck> checks;

    /// Positive rates: every basis state reaches the limit by the horizon.
    /// Some vanishing rate a_N: e_N is stationary (component N stays 1).
    bool consistent() const {
        if (rates_positive) {
            return std::all_of(checks.begin(), checks.end(), [](const LimitCheck& c) { return c.converged; });
        }
        return std::any_of(checks.begin(), checks.end(), [&](const LimitCheck& c) {
            const bool candidate = c.rate == 0.0 && !(limit == "monomer" && c.n == 1);
            return candidate && !c.converged && std::abs(c.component - 1.0) <= 1e-12;
        });
    }

    json to_json() const {
        json rows = json::array();
        for (const auto& c : checks) {
            rows.push_back({{"n", c.n}, {"a_n", c.rate}, {"ratio", c.ratio}, {"component", c.component},
                            {"converged", c.converged}});
        }
        return {{"limit", limit}, {"rates_positive", rates_positive}, {"horizon", horizon}, {"checks", rows},
                {"consistent", consistent()}};
    }
};

namespace detail {

inline DichotomyReport dichotomy(const FragmentationModel& model, const Weight& weight, Index n_max,
                                 double predicted_rate, bool monomer, const EvolveOptions& opts) {
    require(n_max >= 1, ErrorCode::InvalidParameter, "dichotomy: n_max must be >= 1");
    DichotomyReport report;
    report.limit = monomer ? "monomer" : "zero";
    report.horizon = convergence_horizon(predicted_rate);
    for (Index n = 1; n <= n_max; ++n) {
        LimitCheck c;
        c.n = n;
        c.rate = model.a(n);
        c.horizon = report.horizon;
        if (!(monomer && n == 1)) report.rates_positive = report.rates_positive && c.rate > 0.0;
        const auto u0 = StateVector::basis(n, weight);
        auto coeffs = evolve(model, weight, u0, report.horizon, opts).state.coeffs();
        c.component = coeffs[n - 1];
        if (monomer) coeffs[0] -= static_cast<double>(n);
        c.ratio = weighted_norm(coeffs, weight) / weight(n);
        c.converged = c.ratio < kZeroThreshold;
        report.checks.push_back(c);
    }
    return report;
}

} // namespace detail

/// ||S(T) e_n||_w -> 0 for every n iff a_n > 0 for every n.
inline DichotomyReport zero_limit_dichotomy(const FragmentationModel& model, const Weight& weight, Index n_max,
                                            double predicted_rate, const EvolveOptions& opts = {}) {
    return detail::dichotomy(model, weight, n_max, predicted_rate, false, opts);
}

/// ||S(T) e_n - n e_1||_w -> 0 for every n iff a_n > 0 for every n >= 2.
inline DichotomyReport monomer_limit_dichotomy(const FragmentationModel& model, const Weight& weight, Index n_max,
                                               double predicted_rate, const EvolveOptions& opts = {}) {
    return detail::dichotomy(model, weight, n_max, predicted_rate, true, opts);
}

} // namespace fragkin

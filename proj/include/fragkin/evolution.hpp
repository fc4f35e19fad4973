#pragma once

// Time evolution of the truncated fragmentation system u' = G_N u.
//
// Two routes compute exp(t G_N) u0:
//   * closed form: for pairwise distinct diagonals the solution is an
//     exponential sum u_m(t) = sum_k C[m][k] exp(-a_k t), with C filled by
//     back-substitution from the last row upwards;
//   * adaptive: an embedded Runge-Kutta-Fehlberg 7(8) pair with local error
//     control, used for confluent (near-equal) diagonals and whenever the
//     exponential-sum coefficients would amplify round-off.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "fragkin/io.hpp"
#include "fragkin/state.hpp"

namespace fragkin {

struct IntegratorOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    std::size_t max_steps = 2'000'000;
};

enum class PropagationMethod { Identity, ClosedForm, Adaptive };

inline std::string to_string(PropagationMethod m) {
    switch (m) {
    case PropagationMethod::Identity: return "identity";
    case PropagationMethod::ClosedForm: return "closed-form";
    case PropagationMethod::Adaptive: return "adaptive";
    }
    return "unknown";
}

struct Propagation {
    std::vector<double> values;
    PropagationMethod method = PropagationMethod::Identity;
    std::size_t steps = 0;
};

inline constexpr double kResonanceFactor = 1e-6;
inline constexpr Index kClosedFormMaxDim = 128;
inline constexpr double kClosedFormAmplification = 1e4;

namespace detail {

/// Diagonal gaps all exceed kResonanceFactor * max(1, max_n a_n).
inline bool non_resonant(std::span<const double> rates) {
    std::vector<double> sorted(rates.begin(), rates.end());
    std::sort(sorted.begin(), sorted.end());
    const double threshold = kResonanceFactor * std::max(1.0, sorted.back());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] - sorted[i - 1] <= threshold) return false;
    }
    return true;
}

inline std::optional<std::vector<double>> closed_form(const TruncatedGenerator& gen, std::span<const double> u0,
                                                      double t) {
    const Index len = u0.size();
    if (len > kClosedFormMaxDim) return std::nullopt;
    std::vector<double> a(len);
    for (Index n = 0; n < len; ++n) a[n] = -gen(n + 1, n + 1);
    if (!non_resonant(a)) return std::nullopt;

    double scale = 0.0;
    for (double v : u0) scale = std::max(scale, std::abs(v));
    const double limit = kClosedFormAmplification * scale;

    // C[m][k], k >= m, row-major len x len.
    std::vector<double> c(len * len, 0.0);
    for (Index m = len; m-- > 0;) {
        double row_sum = 0.0;
        double row_abs = 0.0;
        for (Index k = m + 1; k < len; ++k) {
            double forcing = 0.0;
            for (Index j = m + 1; j <= k; ++j) forcing += gen(m + 1, j + 1) * c[j * len + k];
            const double coeff = forcing / (a[m] - a[k]);
            c[m * len + k] = coeff;
            row_sum += coeff;
            row_abs += std::abs(coeff);
        }
        c[m * len + m] = u0[m] - row_sum;
        row_abs += std::abs(c[m * len + m]);
        if (row_abs > limit) return std::nullopt;
    }

    std::vector<double> decay(len);
    for (Index k = 0; k < len; ++k) decay[k] = std::exp(-a[k] * t);
    std::vector<double> out(len, 0.0);
    for (Index m = 0; m < len; ++m) {
        double acc = 0.0;
        for (Index k = m; k < len; ++k) acc += c[m * len + k] * decay[k];
        out[m] = acc;
    }
    return out;
}

inline Propagation adaptive(const TruncatedGenerator& gen, std::span<const double> u0, double t,
                            const IntegratorOptions& opts) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;

    State x(u0.begin(), u0.end());
    double max_rate = 0.0;
    for (Index n = 1; n <= x.size(); ++n) max_rate = std::max(max_rate, std::abs(gen(n, n)));

    auto system = [&gen](const State& state, State& dxdt, double) { gen.apply(state, dxdt); };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(opts.abs_tol, opts.rel_tol);

    double time = 0.0;
    double dt = std::min(t, 1.0 / std::max(1.0, max_rate));
    std::size_t steps = 0;
    std::size_t attempts = 0;
    const double min_dt = 1e-14 * std::max(1.0, t);
    while (time < t) {
        const double remaining = t - time;
        const bool last = dt >= remaining;
        double trial = last ? remaining : dt;
        double trial_time = time;
        const auto result = stepper.try_step(system, x, trial_time, trial);
        if (++attempts > opts.max_steps) {
            fail(ErrorCode::ToleranceNotMet, "adaptive integration exceeded " + std::to_string(opts.max_steps) +
                                                 " step attempts before t=" + json(t).dump());
        }
        if (result == odeint::success) {
            ++steps;
            time = last ? t : trial_time;
            dt = trial; // odeint proposes the next step size in place
        } else {
            dt = trial;
            if (dt < min_dt) {
                fail(ErrorCode::ToleranceNotMet, "step size underflow at t=" + json(time).dump() +
                                                     " while meeting abs_tol=" + json(opts.abs_tol).dump());
            }
        }
    }
    return {std::move(x), PropagationMethod::Adaptive, steps};
}

} // namespace detail

/// exp(t G) u0 restricted to the leading u0.size() coordinates. Upper
/// triangularity makes this exact: rows never see coordinates beyond u0.
inline Propagation propagate(const TruncatedGenerator& gen, std::span<const double> u0, double t,
                             const IntegratorOptions& opts = {}) {
    require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidParameter, "time must be finite and >= 0");
    require(u0.size() <= gen.dim(), ErrorCode::LengthMismatch, "initial data longer than the generator");
    if (t == 0.0 || u0.empty()) return {std::vector<double>(u0.begin(), u0.end()), PropagationMethod::Identity, 0};
    if (auto values = detail::closed_form(gen, u0, t)) return {std::move(*values), PropagationMethod::ClosedForm, 0};
    return detail::adaptive(gen, u0, t, opts);
}

// --- semigroup columns --------------------------------------------------------

struct SemigroupColumn {
    Index n = 1;
    double t = 0.0;
    std::vector<double> values;   // s_{m,n}(t), m = 1..n, negatives clamped
    double most_negative = 0.0;   // smallest raw value before clamping
    PropagationMethod method = PropagationMethod::Identity;

    double operator[](Index m) const {
        require(m >= 1 && m <= values.size(), ErrorCode::IndexOutOfRange, "column entry outside 1..n");
        return values[m - 1];
    }
};

/// Column n of the semigroup matrix: the solution of the n-dimensional
/// system with u_n(0) = 1 and u_m(0) = 0 otherwise. The diagonal entry is
/// set to exp(-a_n t) directly.
inline SemigroupColumn semigroup_column(const FragmentationModel& model, Index n, double t,
                                        const IntegratorOptions& opts = {}) {
    require(n >= 1, ErrorCode::IndexOutOfRange, "semigroup_column: n must be >= 1");
    const auto gen = assemble_generator(model, Weight::power(1.0), n);
    std::vector<double> e(n, 0.0);
    e[n - 1] = 1.0;
    auto prop = propagate(gen, e, t, opts);
    prop.values[n - 1] = std::exp(-model.a(n) * t);

    SemigroupColumn col;
    col.n = n;
    col.t = t;
    col.method = prop.method;
    col.most_negative = *std::min_element(prop.values.begin(), prop.values.end());
    col.values = std::move(prop.values);
    for (double& v : col.values) v = std::max(v, 0.0);
    return col;
}

// --- evolve ---------------------------------------------------------------

struct EvolveOptions {
    Index n_start = 0;          // 0: support of u0
    Index n_max = Index{1} << 14;
    double tol = 1e-10;         // weighted-norm increment between successive truncations
    IntegratorOptions integrator;
};

struct EvolveResult {
    StateVector state;              // reported values; negative round-off clamped per sign part
    std::vector<double> raw;        // unclamped values
    Index truncation = 0;           // N of the accepted truncation
    double last_increment = 0.0;
    double most_negative = 0.0;     // smallest raw component of the sign parts
    PropagationMethod method = PropagationMethod::Identity;
};

/// u(t) = S(t) P_N u0 for a doubling schedule of N.
///
/// Once N covers the support of u0, P_N u0 = u0 and no coordinate above the
/// support ever becomes nonzero, so the truncation is exact and the loop
/// stops. Below that, successive truncations are compared in the weighted
/// norm together with the weighted norm of the discarded data (I - P_N) u0;
/// for nonnegative data they increase monotonically in N. Signed data
/// is split into positive and negative parts which are evolved separately.
inline EvolveResult evolve(const FragmentationModel& model, const Weight& weight, const StateVector& u0, double t,
                           const EvolveOptions& opts = {}) {
    require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidParameter, "evolve: time must be finite and >= 0");
    require(opts.tol > 0.0, ErrorCode::InvalidParameter, "evolve: tol must be > 0");
    const Index support = u0.support();
    const Index length = std::max<Index>(u0.size(), 1);

    if (support == 0 || t == 0.0) {
        EvolveResult r{u0.with_weight(weight), u0.coeffs(), support, 0.0, 0.0, PropagationMethod::Identity};
        r.most_negative = 0.0;
        return r;
    }

    Index dim = opts.n_start == 0 ? support : std::min(opts.n_start, support);
    require(dim <= opts.n_max, ErrorCode::InvalidParameter, "evolve: N_start exceeds N_max");

    std::vector<double> pos(u0.size()), neg(u0.size());
    for (Index i = 0; i < u0.size(); ++i) {
        pos[i] = std::max(u0.coeffs()[i], 0.0);
        neg[i] = std::max(-u0.coeffs()[i], 0.0);
    }
    const bool has_neg = std::any_of(neg.begin(), neg.end(), [](double v) { return v != 0.0; });

    struct Trial {
        std::vector<double> pos, neg;
        PropagationMethod method = PropagationMethod::Identity;
    };
    auto run = [&](Index n) {
        const auto gen = assemble_generator(model, weight, n);
        Trial trial;
        auto part = [&](const std::vector<double>& data, std::vector<double>& out) {
            std::span<const double> head(data.data(), std::min(n, data.size()));
            auto prop = propagate(gen, head, t, opts.integrator);
            trial.method = std::max(trial.method, prop.method);
            out = std::move(prop.values);
            out.resize(length, 0.0);
        };
        part(pos, trial.pos);
        if (has_neg) part(neg, trial.neg);
        else trial.neg.assign(length, 0.0);
        return trial;
    };

    std::optional<Trial> previous;
    double increment = 0.0;
    while (true) {
        Trial current = run(dim);
        if (previous) {
            increment = 0.0;
            for (Index i = 0; i < length; ++i) {
                increment += weight(i + 1) *
                             (std::abs(current.pos[i] - previous->pos[i]) + std::abs(current.neg[i] - previous->neg[i]));
            }
        }
        const bool exact = dim >= support;
        // Successive truncations can agree trivially (both zero) while data is
        // still discarded, so the dropped part of u0 must also be below tol.
        double dropped = 0.0;
        for (Index i = dim; i < u0.size(); ++i) dropped += weight(i + 1) * std::abs(u0.coeffs()[i]);
        if (exact || (previous && increment < opts.tol && dropped < opts.tol)) {
            EvolveResult result{StateVector(std::vector<double>(length, 0.0), weight), {}, dim, increment, 0.0,
                                current.method};
            std::vector<double> clamped(length), raw(length);
            double most_negative = 0.0;
            for (Index i = 0; i < length; ++i) {
                raw[i] = current.pos[i] - current.neg[i];
                most_negative = std::min({most_negative, current.pos[i], current.neg[i]});
                clamped[i] = std::max(current.pos[i], 0.0) - std::max(current.neg[i], 0.0);
            }
            result.state = StateVector(std::move(clamped), weight);
            result.raw = std::move(raw);
            result.most_negative = most_negative;
            return result;
        }
        if (dim >= opts.n_max) {
            fail(ErrorCode::TruncationNotConverged,
                 "no convergence at N_max=" + std::to_string(opts.n_max) + ": increment " + json(increment).dump() +
                     ", discarded initial data " + json(dropped).dump() + ", tol " + json(opts.tol).dump());
        }
        previous = std::move(current);
        dim = std::min({2 * dim, support, opts.n_max});
    }
}

/// S_N(t) P_N u0 at one fixed truncation N (no convergence loop).
inline EvolveResult evolve_truncated(const FragmentationModel& model, const Weight& weight, const StateVector& u0,
                                     double t, Index dim, const IntegratorOptions& integrator = {}) {
    require(dim >= 1, ErrorCode::InvalidParameter, "evolve_truncated: N must be >= 1");
    EvolveOptions opts;
    opts.n_start = dim;
    opts.n_max = dim;
    opts.integrator = integrator;
    opts.tol = std::numeric_limits<double>::infinity();
    const auto cut = u0.truncated(std::min(dim, u0.size()));
    auto result = evolve(model, weight, cut.truncated(u0.size()), t, opts);
    result.truncation = dim;
    return result;
}

// --- residual of the pointwise system ------------------------------------------

/// Extra term added to the truncated sum: tail(n) ~ sum_{j > u.size()} a_j b_{n,j} u_j.
using TailCorrection = std::function<double(Index)>;

/// max_{n <= n_check} |du_n + a_n u_n - sum_{j>n} a_j b_{n,j} u_j|, the defect
/// of the pointwise system for a candidate (u, du).
inline double pointwise_residual(const FragmentationModel& model, const StateVector& u, const StateVector& du,
                                 Index n_check = 0, const TailCorrection& tail = {}) {
    const Index len = u.size();
    const Index upto = n_check == 0 ? len : std::min(n_check, len);
    std::vector<double> a(len);
    for (Index j = 1; j <= len; ++j) a[j - 1] = model.a(j);
    double worst = 0.0;
    for (Index n = 1; n <= upto; ++n) {
        double gain = 0.0;
        for (Index j = n + 1; j <= len; ++j) {
            if (u[j] != 0.0) gain += a[j - 1] * model.b(n, j) * u[j];
        }
        if (tail) gain += tail(n);
        worst = std::max(worst, std::abs(du[n] + a[n - 1] * u[n] - gain));
    }
    return worst;
}

// --- trajectory output -------------------------------------------------------

/// CSV `t,n,u_n,weighted_norm,M1`, t-major, n-minor.
inline void write_trajectory_csv(std::ostream& out, const std::vector<std::pair<double, StateVector>>& frames) {
    out << "t,n,u_n,weighted_norm,M1\n";
    for (const auto& [t, state] : frames) {
        const double norm = wnorm(state);
        const double mass = moment_M1(state);
        for (Index n = 1; n <= state.size(); ++n) {
            out << fmt17(t) << ',' << n << ',' << fmt17(state[n]) << ',' << fmt17(norm) << ',' << fmt17(mass) << '\n';
        }
    }
}

} // namespace fragkin

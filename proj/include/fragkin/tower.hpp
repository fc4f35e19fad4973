#pragma once

// Truncated Sobolev tower for the shifted generator G_N - mu I, the
// random-scission eigenvectors g^(lambda) of the maximal operator, and the
// resulting non-uniqueness of pointwise solutions.
//
// All tower norms here are computed on the truncation; on finitely supported
// data they coincide with the norms of the completed spaces.

#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "fragkin/evolution.hpp"

namespace fragkin {

inline constexpr int kMaxTowerOrder = 8;

class TowerContext {
public:
    TowerContext(FragmentationModel model, Weight weight, Index dim, double mu = 1.0)
        : model_(std::move(model)), weight_(std::move(weight)), gen_(assemble_generator(model_, weight_, dim)), mu_(mu) {
        require(std::isfinite(mu) && mu > 0.0, ErrorCode::InvalidParameter, "tower shift mu must be > 0");
    }

    const FragmentationModel& model() const noexcept { return model_; }
    const Weight& weight() const noexcept { return weight_; }
    const TruncatedGenerator& generator() const noexcept { return gen_; }
    double mu() const noexcept { return mu_; }
    Index dim() const noexcept { return gen_.dim(); }

    /// (G_N - mu I) x on the leading x.size() coordinates.
    std::vector<double> apply_shifted(std::span<const double> x) const {
        auto y = gen_.apply(x);
        for (Index i = 0; i < x.size(); ++i) y[i] -= mu_ * x[i];
        return y;
    }

    /// Solves (G_N - mu I) x = rhs by back substitution. The diagonal is
    /// -(a_n + mu) <= -mu < 0, so the system is always nonsingular.
    std::vector<double> solve_shifted(std::span<const double> rhs) const {
        require(rhs.size() <= dim(), ErrorCode::LengthMismatch, "tower solve: vector longer than the truncation");
        const Index len = rhs.size();
        const auto data = gen_.data();
        const Index stride = dim();
        std::vector<double> x(len, 0.0);
        for (Index r = len; r-- > 0;) {
            double acc = rhs[r];
            for (Index c = r + 1; c < len; ++c) acc -= data[r * stride + c] * x[c];
            x[r] = acc / (data[r * stride + r] - mu_);
        }
        return x;
    }

    /// ||(G_N - mu I) x - rhs||_w / ||rhs||_w.
    double solve_residual(std::span<const double> x, std::span<const double> rhs) const {
        const auto back = apply_shifted(x);
        std::vector<double> diff(rhs.size());
        for (Index i = 0; i < rhs.size(); ++i) diff[i] = back[i] - rhs[i];
        const double scale = weighted_norm(rhs, weight_);
        return scale == 0.0 ? weighted_norm(diff, weight_) : weighted_norm(diff, weight_) / scale;
    }

private:
    FragmentationModel model_;
    Weight weight_;
    TruncatedGenerator gen_;
    double mu_;
};

inline constexpr double kSolveResidualLimit = 1e-8;

/// (G_N - mu I)^order f; negative orders apply the inverse |order| times.
inline std::vector<double> tower_apply(const TowerContext& ctx, std::span<const double> f, int order) {
    require(std::abs(order) <= kMaxTowerOrder, ErrorCode::InvalidParameter,
            "tower order " + std::to_string(order) + " exceeds the supported range |order| <= 8");
    require(f.size() <= ctx.dim(), ErrorCode::LengthMismatch, "tower: vector longer than the truncation");
    std::vector<double> x(f.begin(), f.end());
    for (int k = 0; k < std::abs(order); ++k) {
        if (order > 0) {
            x = ctx.apply_shifted(x);
        } else {
            auto next = ctx.solve_shifted(x);
            const double residual = ctx.solve_residual(next, x);
            require(residual <= kSolveResidualLimit, ErrorCode::IllConditioned,
                    "tower solve residual " + json(residual).dump() + " exceeds 1e-8");
            x = std::move(next);
        }
    }
    return x;
}

/// ||f||_order = ||(G_N - mu I)^order f||_w (truncated tower norm).
inline double sobolev_norm(const TowerContext& ctx, std::span<const double> f, int order) {
    return weighted_norm(tower_apply(ctx, f, order), ctx.weight());
}

inline double sobolev_norm(const TowerContext& ctx, const StateVector& f, int order) {
    return sobolev_norm(ctx, std::span<const double>(f.coeffs()), order);
}

/// ||(G_N - mu I)^{-1}||_w, the l^1_w operator norm: max_j ||column j||_w / w_j.
inline double inverse_operator_norm(const TowerContext& ctx) {
    double worst = 0.0;
    for (Index j = 1; j <= ctx.dim(); ++j) {
        std::vector<double> rhs(j, 0.0);
        rhs[j - 1] = 1.0;
        const auto col = ctx.solve_shifted(rhs);
        worst = std::max(worst, weighted_norm(col, ctx.weight()) / ctx.weight()(j));
    }
    return worst;
}

struct TowerRow {
    double t = 0.0;
    int order = 0;
    double norm = 0.0;
};

/// Tower norms of orders -2..2 of the evolved state at each time.
inline std::vector<TowerRow> smoothing_demo(const TowerContext& ctx, const StateVector& f_rough,
                                            const std::vector<double>& times, const IntegratorOptions& integrator = {}) {
    require(f_rough.nonnegative(), ErrorCode::InvalidParameter, "smoothing_demo: f must be nonnegative");
    require(f_rough.support() <= ctx.dim(), ErrorCode::LengthMismatch, "smoothing_demo: f exceeds the truncation");
    std::vector<TowerRow> rows;
    for (double t : times) {
        const auto evolved = evolve_truncated(ctx.model(), ctx.weight(), f_rough, t, ctx.dim(), integrator);
        for (int order = -2; order <= 2; ++order) rows.push_back({t, order, sobolev_norm(ctx, evolved.state, order)});
    }
    return rows;
}

inline void write_tower_csv(std::ostream& out, const std::vector<TowerRow>& rows) {
    out << "t,order,norm\n";
    for (const auto& r : rows) out << fmt17(r.t) << ',' << r.order << ',' << fmt17(r.norm) << '\n';
}

// --- eigenvectors of the maximal random-scission operator ---------------------

/// g_n = 1/((lambda+n-1)(lambda+n)(lambda+n+1)), n = 1..n_max, with the
/// telescoping tail sum_{j>n} g_j = 1/(2(lambda+n)(lambda+n+1)).
struct EigenPair {
    double lambda = 1.0;
    std::vector<double> g;
    Index tail_start = 0;   // = n_max; the stored vector ends here

    static double entry(double lambda, Index n) {
        const double x = lambda + static_cast<double>(n);
        return 1.0 / ((x - 1.0) * x * (x + 1.0));
    }

    double tail(Index n) const {
        const double x = lambda + static_cast<double>(n);
        return 1.0 / (2.0 * x * (x + 1.0));
    }
};

inline EigenPair eigenpair(double lambda, Index n_max) {
    require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidParameter, "eigenpair: lambda must be > 0");
    require(n_max >= 1, ErrorCode::InvalidParameter, "eigenpair: n_max must be >= 1");
    EigenPair pair;
    pair.lambda = lambda;
    pair.tail_start = n_max;
    pair.g.resize(n_max);
    for (Index n = 1; n <= n_max; ++n) pair.g[n - 1] = EigenPair::entry(lambda, n);
    return pair;
}

/// max_{n <= n_check} |-(n-1) g_n + 2 (sum_{j=n+1}^{n_max} g_j + tail) - lambda g_n|.
/// Dropping the tail exposes the truncation: the defect is then about 1/n_max^2.
inline double eigen_residual(const EigenPair& pair, Index n_check, bool include_tail = true) {
    const Index n_max = pair.g.size();
    require(n_check >= 1 && n_check <= pair.tail_start, ErrorCode::InvalidParameter,
            "eigen_residual: n_check must lie in [1, n_max]");
    // suffix[n] = sum_{j=n+1}^{n_max} g_j, accumulated from the small end
    std::vector<double> suffix(n_max + 1, 0.0);
    for (Index n = n_max; n-- > 0;) suffix[n] = suffix[n + 1] + pair.g[n];
    const double tail = include_tail ? pair.tail(n_max) : 0.0;
    double worst = 0.0;
    for (Index n = 1; n <= n_check; ++n) {
        const double gn = pair.g[n - 1];
        const double gain = 2.0 * (suffix[n] + tail);
        worst = std::max(worst, std::abs(-static_cast<double>(n - 1) * gn + gain - pair.lambda * gn));
    }
    return worst;
}

/// Sequence with optional closed-form tail, for domain_G1_check.
struct TailSequence {
    std::vector<double> values;
    bool infinite_support = false;
    std::function<double(Index)> tail;   // sum_{k>n} f_k, required when infinite_support
};

struct DomainG1Report {
    std::vector<double> diagnostic;   // n^2 sum_{k>n} f_k, n = 1..n_max
    double limit_estimate = 0.0;      // mean over the trailing half
    Index window_first = 1;
    Index window_last = 1;

    json to_json() const {
        return {{"limit_estimate", limit_estimate}, {"window", {window_first, window_last}},
                {"diagnostic_last", diagnostic.empty() ? 0.0 : diagnostic.back()}};
    }
};

inline DomainG1Report domain_G1_check(const TailSequence& f, Index n_max) {
    require(n_max >= 1, ErrorCode::InvalidParameter, "domain_G1_check: n_max must be >= 1");
    require(!f.infinite_support || static_cast<bool>(f.tail), ErrorCode::TailUnavailable,
            "domain_G1_check: infinite-support input needs a closed-form tail");
    DomainG1Report report;
    report.diagnostic.resize(n_max);
    std::vector<double> suffix;
    if (!f.tail) {
        suffix.assign(f.values.size() + 1, 0.0);
        for (Index n = f.values.size(); n-- > 0;) suffix[n] = suffix[n + 1] + f.values[n];
    }
    for (Index n = 1; n <= n_max; ++n) {
        const double tail = f.tail ? f.tail(n) : (n < suffix.size() ? suffix[n] : 0.0);
        report.diagnostic[n - 1] = static_cast<double>(n) * static_cast<double>(n) * tail;
    }
    report.window_first = n_max / 2 + 1;
    report.window_last = n_max;
    double sum = 0.0;
    for (Index n = report.window_first; n <= n_max; ++n) sum += report.diagnostic[n - 1];
    report.limit_estimate = sum / static_cast<double>(n_max - report.window_first + 1);
    return report;
}

inline DomainG1Report domain_G1_check(std::span<const double> f, Index n_max) {
    return domain_G1_check(TailSequence{{f.begin(), f.end()}, false, {}}, n_max);
}

inline DomainG1Report domain_G1_check(const EigenPair& pair, Index n_max) {
    return domain_G1_check(TailSequence{pair.g, true, [&pair](Index n) { return pair.tail(n); }}, n_max);
}

struct NonuniquenessReport {
    double lambda = 1.0;
    double t = 0.0;
    Index dim = 0;
    std::vector<double> sol_a;   // e^{lambda t} g
    std::vector<double> sol_b;   // S(t) g (truncated)
    double residual_a = 0.0;
    double residual_b = 0.0;
    double norm_gap = 0.0;       // ||sol_a - sol_b||_[1]
    double g_norm = 0.0;         // ||g||_[1]
    double sol_a_norm = 0.0;
    double sol_b_norm = 0.0;

    double margin() const { return g_norm > 0.0 ? norm_gap / g_norm : 0.0; }

    json to_json() const {
        return {{"lambda", lambda},     {"t", t},
                {"N", dim},             {"residual_a", residual_a},
                {"residual_b", residual_b}, {"norm_gap", norm_gap},
                {"g_norm", g_norm},     {"sol_a_norm", sol_a_norm},
                {"sol_b_norm", sol_b_norm}, {"margin", margin()},
                {"residual_coordinates", dim / 2}, {"norm", "power(p=1)"}};
    }
};

/// Two solutions of the random-scission system from the same data g^(lambda):
/// the exponential e^{lambda t} g of the maximal operator and the semigroup
/// orbit S(t) g. Both satisfy the pointwise equations; they differ in norm.
inline NonuniquenessReport nonuniqueness_demo(double lambda, double t, Index dim,
                                              const IntegratorOptions& integrator = {}) {
    require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidParameter, "nonuniqueness_demo: t must be >= 0");
    require(dim >= 2, ErrorCode::InvalidParameter, "nonuniqueness_demo: N must be >= 2");
    const auto model = FragmentationModel::random_scission();
    const auto mass = Weight::power(1.0);
    const auto pair = eigenpair(lambda, dim);
    const double growth = std::exp(lambda * t);

    NonuniquenessReport r;
    r.lambda = lambda;
    r.t = t;
    r.dim = dim;
    r.sol_a.resize(dim);
    for (Index n = 0; n < dim; ++n) r.sol_a[n] = growth * pair.g[n];

    const StateVector g(pair.g, mass);
    const auto evolved = evolve_truncated(model, mass, g, t, dim, integrator);
    r.sol_b = evolved.raw;

    // d/dt S(t) g = S(t) G_N g, computed along an independent orbit
    const auto gen = assemble_generator(model, mass, dim);
    const StateVector generated(gen.apply(pair.g), mass);
    const auto derivative = evolve_truncated(model, mass, generated, t, dim, integrator);

    std::vector<double> du_a(dim);
    for (Index n = 0; n < dim; ++n) du_a[n] = lambda * r.sol_a[n];
    // a_j b_{n,j} = 2 for j > n, so the part of the gain beyond N is 2 e^{lambda t} tail(N)
    const double beyond = 2.0 * growth * pair.tail(dim);
    r.residual_a = pointwise_residual(model, StateVector(r.sol_a, mass), StateVector(du_a, mass), dim / 2,
                                      [beyond](Index) { return beyond; });
    r.residual_b = pointwise_residual(model, StateVector(r.sol_b, mass), StateVector(derivative.raw, mass), dim / 2);

    std::vector<double> diff(dim);
    for (Index n = 0; n < dim; ++n) diff[n] = r.sol_a[n] - r.sol_b[n];
    r.norm_gap = weighted_norm(diff, mass);
    r.g_norm = weighted_norm(pair.g, mass);
    r.sol_a_norm = weighted_norm(r.sol_a, mass);
    r.sol_b_norm = weighted_norm(r.sol_b, mass);
    return r;
}

} // namespace fragkin

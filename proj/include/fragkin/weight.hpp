#pragma once

// Weight sequences for the spaces l^1_w and the kappa-inequality
//   sum_{n<j} w_n b_{n,j} <= kappa w_j
// that controls substochasticity (kappa <= 1) and analyticity (kappa < 1).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragkin/model.hpp"

namespace fragkin {

enum class WeightKind { Power, Geometric, Dyadic, GraphTilde, Custom, Constructed };

inline std::string to_string(WeightKind kind) {
    switch (kind) {
    case WeightKind::Power: return "power";
    case WeightKind::Geometric: return "geometric";
    case WeightKind::Dyadic: return "dyadic";
    case WeightKind::GraphTilde: return "graph_tilde";
    case WeightKind::Custom: return "custom";
    case WeightKind::Constructed: return "constructed";
    }
    return "unknown";
}

/// Positive weight sequence w_n, n >= 1.
///
/// Power(p): n^p. Geometric(r): r^n. Dyadic: 1, 4, 8, 16, ... (w_1 = 1,
/// w_n = 2^n otherwise). Stored kinds (GraphTilde, Custom, Constructed) are
/// finite and refuse evaluation beyond their length.
///
/// Like models, a weight can carry an index shift (w_hat_n = w_{n+s}) and a
/// positive scale factor.
class Weight {
public:
    static Weight power(double p) {
        require(std::isfinite(p) && p >= 1.0, ErrorCode::InvalidParameter, "power_weight: p must be >= 1");
        Weight w(WeightKind::Power);
        w.param_ = p;
        return w;
    }

    static Weight geometric(double r) {
        require(std::isfinite(r) && r > 1.0, ErrorCode::InvalidParameter, "geometric_weight: r must be > 1");
        Weight w(WeightKind::Geometric);
        w.param_ = r;
        return w;
    }

    static Weight dyadic() { return Weight(WeightKind::Dyadic); }

    static Weight custom(std::vector<double> values) { return stored(WeightKind::Custom, std::move(values)); }

    /// Weight built against a specific model so that its kappa-ratios stay below target_kappa.
    static Weight constructed(std::vector<double> values, double target_kappa, FragmentationModel origin) {
        Weight w = stored(WeightKind::Constructed, std::move(values));
        w.param_ = target_kappa;
        w.origin_ = std::make_shared<const FragmentationModel>(std::move(origin));
        return w;
    }

    static Weight graph_tilde(std::vector<double> values) { return stored(WeightKind::GraphTilde, std::move(values)); }

    /// Accepts a bare array (custom values) or {"kind": ..., parameters}.
    static Weight from_json(const json& doc) {
        if (doc.is_array()) return custom(numbers(doc, "weight values"));
        require(doc.is_object() && doc.contains("kind") && doc.at("kind").is_string(), ErrorCode::InvalidParameter,
                "weight: expected an array or an object with a 'kind'");
        const auto kind = doc.at("kind").get<std::string>();
        auto only = [&](std::initializer_list<const char*> allowed) {
            for (const auto& [key, _] : doc.items()) {
                bool ok = key == "kind";
                for (const char* a : allowed) ok = ok || key == a;
                require(ok, ErrorCode::InvalidParameter, "weight: unknown key '" + key + "' for kind " + kind);
            }
        };
        auto number = [&](const char* key) {
            require(doc.contains(key) && doc.at(key).is_number(), ErrorCode::InvalidParameter,
                    std::string("weight: numeric '") + key + "' required");
            return doc.at(key).get<double>();
        };
        if (kind == "power") {
            only({"p"});
            return power(number("p"));
        }
        if (kind == "geometric") {
            only({"r"});
            return geometric(number("r"));
        }
        if (kind == "dyadic") {
            only({});
            return dyadic();
        }
        if (kind == "custom") {
            only({"values"});
            require(doc.contains("values"), ErrorCode::InvalidParameter, "weight: custom needs 'values'");
            return custom(numbers(doc.at("values"), "weight values"));
        }
        fail(ErrorCode::InvalidParameter, "weight: unknown kind '" + kind + "'");
    }

    WeightKind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return param_; }
    Index shift() const noexcept { return shift_; }
    double scale() const noexcept { return scale_; }
    const FragmentationModel* origin() const noexcept { return origin_.get(); }

    std::optional<Index> max_index() const {
        if (!is_stored()) return std::nullopt;
        return values_.size() > shift_ ? values_.size() - shift_ : 0;
    }

    double operator()(Index n) const {
        require(n >= 1, ErrorCode::IndexOutOfRange, "w_n requires n >= 1");
        const Index m = n + shift_;
        const double x = static_cast<double>(m);
        switch (kind_) {
        case WeightKind::Power: return scale_ * std::pow(x, param_);
        case WeightKind::Geometric: return scale_ * std::pow(param_, x);
        case WeightKind::Dyadic: return scale_ * (m == 1 ? 1.0 : std::ldexp(1.0, static_cast<int>(m)));
        default:
            require(m <= values_.size(), ErrorCode::IndexOutOfRange,
                    to_string(kind_) + " weight has no value at n=" + std::to_string(m));
            return scale_ * values_[m - 1];
        }
    }

    /// w_n as an exact rational: integer closed forms for builtin kinds, the exact
    /// value of the stored double otherwise.
    std::optional<Rational> exact(Index n) const {
        require(n >= 1, ErrorCode::IndexOutOfRange, "w_n requires n >= 1");
        if (scale_ != std::floor(scale_) || scale_ > 9007199254740992.0) return std::nullopt;
        const Index m = n + shift_;
        const boost::multiprecision::cpp_int factor(static_cast<long long>(scale_));
        switch (kind_) {
        case WeightKind::Power:
            if (param_ != std::floor(param_)) return std::nullopt;
            return Rational(factor * boost::multiprecision::pow(boost::multiprecision::cpp_int(m),
                                                                static_cast<unsigned>(param_)));
        case WeightKind::Geometric:
            if (param_ != std::floor(param_)) return std::nullopt;
            return Rational(factor * boost::multiprecision::pow(
                                         boost::multiprecision::cpp_int(static_cast<long long>(param_)),
                                         static_cast<unsigned>(m)));
        case WeightKind::Dyadic:
            return Rational(m == 1 ? factor : factor * (boost::multiprecision::cpp_int(1) << static_cast<unsigned>(m)));
        default:
            return Rational((*this)(n));
        }
    }

    std::vector<double> values(Index n_max) const {
        std::vector<double> out(n_max);
        for (Index n = 1; n <= n_max; ++n) out[n - 1] = (*this)(n);
        return out;
    }

    Weight shifted(Index by = 1) const {
        Weight copy = *this;
        copy.shift_ += by;
        return copy;
    }

    Weight unshifted(Index by = 1) const {
        require(shift_ >= by, ErrorCode::InvalidParameter, "unshifted: weight shift is smaller than requested");
        Weight copy = *this;
        copy.shift_ -= by;
        return copy;
    }

    Weight scaled(double factor) const {
        require(std::isfinite(factor) && factor > 0.0, ErrorCode::InvalidParameter, "weight scale must be > 0");
        Weight copy = *this;
        copy.scale_ *= factor;
        return copy;
    }

    std::string describe() const {
        std::string s = to_string(kind_);
        if (kind_ == WeightKind::Power) s += "(p=" + json(param_).dump() + ")";
        if (kind_ == WeightKind::Geometric) s += "(r=" + json(param_).dump() + ")";
        if (kind_ == WeightKind::Constructed) s += "(kappa=" + json(param_).dump() + ")";
        if (is_stored()) s += "[len=" + std::to_string(values_.size()) + "]";
        if (shift_ != 0) s += "+shift" + std::to_string(shift_);
        if (scale_ != 1.0) s += "*" + json(scale_).dump();
        return s;
    }

    json to_json() const {
        json out = {{"kind", to_string(kind_)}, {"describe", describe()}};
        if (kind_ == WeightKind::Power) out["p"] = param_;
        if (kind_ == WeightKind::Geometric) out["r"] = param_;
        if (is_stored()) out["values"] = values_;
        if (kind_ == WeightKind::Constructed) out["target_kappa"] = param_;
        return out;
    }

private:
    explicit Weight(WeightKind kind) : kind_(kind) {}

    static Weight stored(WeightKind kind, std::vector<double> values) {
        require(!values.empty(), ErrorCode::InvalidParameter, "weight values must not be empty");
        for (double v : values) {
            require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidParameter, "weight values must be finite and > 0");
        }
        Weight w(kind);
        w.values_ = std::move(values);
        return w;
    }

    static std::vector<double> numbers(const json& arr, const std::string& what) {
        require(arr.is_array(), ErrorCode::InvalidParameter, what + ": expected an array");
        std::vector<double> out;
        for (const auto& v : arr) {
            require(v.is_number(), ErrorCode::InvalidParameter, what + ": expected numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }

    bool is_stored() const noexcept {
        return kind_ == WeightKind::GraphTilde || kind_ == WeightKind::Custom || kind_ == WeightKind::Constructed;
    }

    WeightKind kind_;
    double param_ = 0.0;
    double scale_ = 1.0;
    Index shift_ = 0;
    std::vector<double> values_;
    std::shared_ptr<const FragmentationModel> origin_;
};

inline Weight power_weight(double p) { return Weight::power(p); }
inline Weight geometric_weight(double r) { return Weight::geometric(r); }
inline Weight custom_weight(std::vector<double> values) { return Weight::custom(std::move(values)); }

// --- kappa ------------------------------------------------------------------

enum class KappaVerdict { Strict, Weak, Fails };

inline std::string to_string(KappaVerdict v) {
    switch (v) {
    case KappaVerdict::Strict: return "strict";
    case KappaVerdict::Weak: return "weak";
    case KappaVerdict::Fails: return "fails";
    }
    return "unknown";
}

struct KappaCertificate {
    double value = 0.0;   // proven upper bound for sup_j rho_j over every j
    std::string tag;
};

struct KappaReport {
    std::vector<double> rho;             // rho[k] is rho_{k+2}
    Index j_first = 2;
    Index j_last = 2;
    double sup_checked = 0.0;
    Index argsup = 2;
    std::optional<double> analytic_sup;
    std::optional<std::string> certificate;
    std::optional<Rational> exact_sup;   // exact max over the checked range, when computable
    KappaVerdict verdict = KappaVerdict::Fails;

    /// kappa usable in bounds: the certified value.
    double certified_kappa() const {
        require(analytic_sup.has_value(), ErrorCode::AssumptionNotCertified,
                "kappa is only known on the finite range [" + std::to_string(j_first) + ", " +
                    std::to_string(j_last) + "]");
        return *analytic_sup;
    }

    double rho_at(Index j) const {
        require(j >= j_first && j <= j_last, ErrorCode::IndexOutOfRange, "rho_j outside checked range");
        return rho[j - j_first];
    }

    json to_json() const {
        json out = {{"rho", rho},
                    {"sup_checked", sup_checked},
                    {"argsup", argsup},
                    {"verdict", to_string(verdict)},
                    {"j_range", {j_first, j_last}}};
        if (analytic_sup) out["analytic_sup"] = *analytic_sup;
        if (certificate) out["certificate"] = *certificate;
        if (exact_sup) out["exact_sup"] = exact_sup->str();
        return out;
    }
};

struct KappaOptions {
    bool require_weight_bound = true;  // assert w_n >= n on the checked range
    Index exact_limit = 256;           // compute exact_sup only up to this j_max
};

namespace detail {

inline std::optional<KappaCertificate> closed_form_certificate(const FragmentationModel& model, const Weight& w) {
    // Closed-form bounds valid for every j, independent of the checked range.
    if (w.kind() == WeightKind::Geometric && w.parameter() > 2.0 && model.certified_mass_nonincreasing()) {
        return KappaCertificate{2.0 / w.parameter(), "geometric-weight: kappa = 2/r"};
    }
    if (model.shift() == 0 && w.shift() == 0) {
        if (w.kind() == WeightKind::Dyadic && model.kind() == ModelKind::BinaryChipOff) {
            return KappaCertificate{5.0 / 8.0, "binary-chip-off-dyadic: kappa = 5/8"};
        }
        if (w.kind() == WeightKind::Power && w.parameter() == 1.0 && model.certified_mass_nonincreasing()) {
            return KappaCertificate{1.0, "mass-weight: rho_j = 1 - lambda_j <= 1"};
        }
    }
    if (w.kind() == WeightKind::Constructed && w.shift() == model.shift() && w.origin() != nullptr &&
        w.origin()->shifted(model.shift()) == model) {
        return KappaCertificate{w.parameter(), "constructed: w_j >= (1/kappa) sum w_n b_{n,j} on the weight's domain"};
    }
    // Reduced systems inherit the parent's kappa: sum_{n<j} w_{n+1} b_{n+1,j+1} <= kappa w_{j+1}.
    if (model.shift() > 0 && model.shift() == w.shift()) {
        if (auto parent = closed_form_certificate(model.unshifted(1), w.unshifted(1))) {
            return KappaCertificate{parent->value, "reduced-system: inherits " + parent->tag};
        }
    }
    return std::nullopt;
}

} // namespace detail

inline KappaReport kappa(const FragmentationModel& model, const Weight& weight, Index j_max, KappaOptions opts = {}) {
    require(j_max >= 2, ErrorCode::InvalidParameter, "kappa: j_max must be >= 2");
    const auto w = weight.values(j_max);
    if (opts.require_weight_bound) {
        for (Index n = 1; n <= j_max; ++n) {
            require(w[n - 1] >= static_cast<double>(n), ErrorCode::WeightBelowIndex,
                    "w_" + std::to_string(n) + " = " + json(w[n - 1]).dump() + " < " + std::to_string(n));
        }
    }

    KappaReport report;
    report.j_last = j_max;
    report.rho.reserve(j_max - 1);
    for (Index j = 2; j <= j_max; ++j) {
        double daughters = 0.0;
        for (Index n = 1; n < j; ++n) daughters += w[n - 1] * model.b(n, j);
        const double rho = daughters / w[j - 1];
        if (report.rho.empty() || rho > report.sup_checked) {
            report.sup_checked = rho;
            report.argsup = j;
        }
        report.rho.push_back(rho);
    }

    if (j_max <= opts.exact_limit) {
        std::optional<Rational> best;
        for (Index j = 2; j <= j_max && (j == 2 || best); ++j) {
            const auto wj = weight.exact(j);
            if (!wj) {
                best.reset();
                break;
            }
            Rational daughters = 0;
            bool ok = true;
            for (Index n = 1; n < j && ok; ++n) {
                const auto b = model.exact_b(n, j);
                const auto wn = weight.exact(n);
                ok = b && wn;
                if (ok && *b != 0) daughters += *wn * *b;
            }
            if (!ok) {
                best.reset();
                break;
            }
            const Rational rho = daughters / *wj;
            if (!best || rho > *best) best = rho;
        }
        report.exact_sup = best;
    }

    auto cert = detail::closed_form_certificate(model, weight);
    if (!cert) {
        std::optional<Index> domain = model.max_index();
        if (const auto wd = weight.max_index()) domain = domain ? std::min(*domain, *wd) : *wd;
        if (domain && j_max >= *domain) {
            cert = KappaCertificate{report.sup_checked,
                                    "exhaustive: the joint domain [1, " + std::to_string(*domain) + "] was fully checked"};
        }
    }
    if (cert) {
        report.analytic_sup = cert->value;
        report.certificate = cert->tag;
        report.verdict = cert->value < 1.0    ? KappaVerdict::Strict
                         : cert->value <= 1.0 ? KappaVerdict::Weak
                                              : KappaVerdict::Fails;
    } else {
        // Finite-range evidence only: a violation is definite, compliance is not.
        report.verdict = report.sup_checked > 1.0 ? KappaVerdict::Fails : KappaVerdict::Weak;
    }
    return report;
}

/// Builds w with w_1 = 1 and w_j = max(j, (1/target) sum_{n<j} w_n b_{n,j}),
/// so every ratio rho_j on [2, j_max] is at most target_kappa.
inline Weight construct_analytic_weight(const FragmentationModel& model, double target_kappa, Index j_max) {
    require(target_kappa > 0.0 && target_kappa < 1.0, ErrorCode::InvalidParameter,
            "construct_analytic_weight: target kappa must lie in (0, 1)");
    require(j_max >= 1, ErrorCode::InvalidParameter, "construct_analytic_weight: j_max must be >= 1");
    std::vector<double> w(j_max);
    w[0] = 1.0;
    for (Index j = 2; j <= j_max; ++j) {
        double daughters = 0.0;
        for (Index n = 1; n < j; ++n) daughters += w[n - 1] * model.b(n, j);
        double wj = std::max(static_cast<double>(j), daughters / target_kappa);
        // the division above may round down; nudge until the ratio is honoured in floating point
        while (daughters / wj > target_kappa) wj = std::nextafter(wj, std::numeric_limits<double>::infinity());
        w[j - 1] = wj;
    }
    return Weight::constructed(std::move(w), target_kappa, model);
}

/// w~_n = w_n (1 + c_n).
inline Weight graph_weight(const Weight& weight, std::span<const double> c) {
    require(!c.empty(), ErrorCode::InvalidParameter, "graph_weight: c must not be empty");
    if (const auto len = weight.max_index()) {
        require(*len >= c.size(), ErrorCode::LengthMismatch,
                "graph_weight: weight has " + std::to_string(*len) + " entries, c has " + std::to_string(c.size()));
    }
    std::vector<double> out(c.size());
    for (Index n = 1; n <= c.size(); ++n) {
        const double cn = c[n - 1];
        require(cn >= 0.0 && (n == 1 || cn >= c[n - 2]), ErrorCode::InvalidParameter,
                "graph_weight: c must be nonnegative and nondecreasing");
        out[n - 1] = weight(n) * (1.0 + cn);
    }
    return Weight::graph_tilde(std::move(out));
}

/// 1 <= w_n/n <= delta w_{n+1}/(n+1) for 1 <= n < n_max.
inline bool check_ratio_condition(const Weight& weight, double delta, Index n_max) {
    require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidParameter, "check_ratio_condition: delta must lie in (0, 1)");
    require(n_max >= 2, ErrorCode::InvalidParameter, "check_ratio_condition: n_max must be >= 2");
    double ratio = weight(1);
    for (Index n = 1; n < n_max; ++n) {
        const double next = weight(n + 1) / static_cast<double>(n + 1);
        if (ratio < 1.0 || ratio > delta * next) return false;
        ratio = next;
    }
    return true;
}

} // namespace fragkin

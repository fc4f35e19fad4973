#pragma once

// Fragmentation coefficient models: loss rates a_n and daughter rates b_{n,j},
// plus the mass-balance classification built on top of them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "fragkin/errors.hpp"

namespace fragkin {

using Index = std::size_t;
using Rational = boost::multiprecision::cpp_rational;
using json = nlohmann::json;

enum class ModelKind { RandomScission, BinaryChipOff, UniformBinary, Table };

inline std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::RandomScission: return "random_scission";
    case ModelKind::BinaryChipOff: return "binary_chip_off";
    case ModelKind::UniformBinary: return "uniform_binary";
    case ModelKind::Table: return "table";
    }
    return "unknown";
}

namespace detail {

struct RandomScissionRates {
    bool operator==(const RandomScissionRates&) const = default;
};

struct BinaryChipOffRates {
    bool operator==(const BinaryChipOffRates&) const = default;
};

// a_n = n^gamma for n >= 2, a_1 free; b_{n,j} = 2/(j-1).
struct UniformBinaryRates {
    double gamma = 1.0;
    double a1 = 0.0;
    bool operator==(const UniformBinaryRates&) const = default;
};

struct TableRates {
    std::vector<double> a;                           // a[n-1]
    std::map<std::pair<Index, Index>, double> b;     // (n, j) -> b_{n,j}; absent means 0
    Index j_max = 0;
    bool operator==(const TableRates&) const = default;
};

} // namespace detail

/// Coefficient pair (a_n), (b_{n,j}) for the discrete fragmentation system
///   u_n' = -a_n u_n + sum_{j>n} a_j b_{n,j} u_j.
///
/// Models are immutable values. A model may carry an index shift s, in which
/// case a(n) = a_base(n+s) and b(n,j) = b_base(n+s, j+s); this is how the
/// reduced (monomer-free) system is represented.
class FragmentationModel {
public:
    static FragmentationModel random_scission() { return FragmentationModel(detail::RandomScissionRates{}); }
    static FragmentationModel binary_chip_off() { return FragmentationModel(detail::BinaryChipOffRates{}); }

    static FragmentationModel uniform_binary(double gamma, double a1 = 0.0) {
        require(std::isfinite(gamma), ErrorCode::InvalidParameter, "uniform_binary: gamma must be finite");
        require(std::isfinite(a1) && a1 >= 0.0, ErrorCode::InvalidParameter, "uniform_binary: a1 must be >= 0");
        return FragmentationModel(detail::UniformBinaryRates{gamma, a1});
    }

    struct TableEntry {
        Index n = 0;
        Index j = 0;
        double value = 0.0;
    };

    /// Finite model. b entries missing inside [1, j_max] are zero; any query
    /// outside the stored range raises IndexOutOfRange.
    static FragmentationModel table(std::vector<double> a, const std::vector<TableEntry>& b,
                                    std::optional<Index> j_max = std::nullopt) {
        require(!a.empty(), ErrorCode::InvalidParameter, "table: a must not be empty");
        for (std::size_t i = 0; i < a.size(); ++i) {
            require(std::isfinite(a[i]) && a[i] >= 0.0, ErrorCode::InvalidParameter,
                    "table: a_" + std::to_string(i + 1) + " must be finite and >= 0");
        }
        detail::TableRates rates;
        rates.j_max = j_max.value_or(a.size());
        require(rates.j_max >= 1, ErrorCode::InvalidParameter, "table: j_max must be >= 1");
        for (const auto& e : b) {
            require(e.n >= 1 && e.j >= 2, ErrorCode::InvalidParameter, "table: b indices must satisfy n >= 1, j >= 2");
            require(e.n < e.j, ErrorCode::InvalidParameter,
                    "table: b_{" + std::to_string(e.n) + "," + std::to_string(e.j) + "} must vanish for n >= j");
            require(e.j <= rates.j_max, ErrorCode::InvalidParameter,
                    "table: b entry with j=" + std::to_string(e.j) + " beyond j_max");
            require(std::isfinite(e.value) && e.value >= 0.0, ErrorCode::InvalidParameter,
                    "table: b values must be finite and >= 0");
            if (e.value != 0.0) rates.b[{e.n, e.j}] = e.value;
        }
        rates.a = std::move(a);
        return FragmentationModel(std::move(rates));
    }

    /// {"a": [...], "b": [{"n":..,"j":..,"value":..}, ...], "j_max": ...}
    static FragmentationModel table_from_json(const json& doc) {
        require(doc.is_object(), ErrorCode::InvalidParameter, "table document must be an object");
        for (const auto& [key, _] : doc.items()) {
            require(key == "a" || key == "b" || key == "j_max", ErrorCode::InvalidParameter,
                    "table document: unknown key '" + key + "'");
        }
        require(doc.contains("a") && doc.at("a").is_array(), ErrorCode::InvalidParameter,
                "table document: 'a' array is required");
        std::vector<double> a;
        for (const auto& v : doc.at("a")) {
            require(v.is_number(), ErrorCode::InvalidParameter, "table document: 'a' must hold numbers");
            a.push_back(v.get<double>());
        }
        std::vector<TableEntry> b;
        if (doc.contains("b")) {
            require(doc.at("b").is_array(), ErrorCode::InvalidParameter, "table document: 'b' must be an array");
            for (const auto& e : doc.at("b")) {
                require(e.is_object() && e.size() == 3 && e.contains("n") && e.contains("j") && e.contains("value"),
                        ErrorCode::InvalidParameter, "table document: b entries need exactly n, j, value");
                require(e.at("n").is_number_unsigned() && e.at("j").is_number_unsigned() && e.at("value").is_number(),
                        ErrorCode::InvalidParameter, "table document: malformed b entry");
                b.push_back({e.at("n").get<Index>(), e.at("j").get<Index>(), e.at("value").get<double>()});
            }
        }
        std::optional<Index> j_max;
        if (doc.contains("j_max")) {
            require(doc.at("j_max").is_number_unsigned(), ErrorCode::InvalidParameter,
                    "table document: j_max must be a positive integer");
            j_max = doc.at("j_max").get<Index>();
        }
        return table(std::move(a), b, j_max);
    }

    json table_to_json() const {
        require(kind() == ModelKind::Table && shift_ == 0, ErrorCode::InvalidParameter,
                "table_to_json: only unshifted table models serialize as tables");
        const auto& t = std::get<detail::TableRates>(rates_);
        json b = json::array();
        for (const auto& [key, value] : t.b) b.push_back({{"n", key.first}, {"j", key.second}, {"value", value}});
        return {{"a", t.a}, {"b", b}, {"j_max", t.j_max}};
    }

    ModelKind kind() const noexcept {
        return std::visit(
            [](const auto& r) -> ModelKind {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, detail::RandomScissionRates>) return ModelKind::RandomScission;
                else if constexpr (std::is_same_v<T, detail::BinaryChipOffRates>) return ModelKind::BinaryChipOff;
                else if constexpr (std::is_same_v<T, detail::UniformBinaryRates>) return ModelKind::UniformBinary;
                else return ModelKind::Table;
            },
            rates_);
    }

    Index shift() const noexcept { return shift_; }

    /// Largest index at which a(n) is defined; nullopt for unbounded builtins.
    std::optional<Index> max_index() const {
        if (const auto* t = std::get_if<detail::TableRates>(&rates_)) {
            const Index base = std::min<Index>(t->a.size(), t->j_max);
            return base > shift_ ? base - shift_ : 0;
        }
        return std::nullopt;
    }

    double a(Index n) const {
        require(n >= 1, ErrorCode::IndexOutOfRange, "a_n requires n >= 1");
        const Index m = n + shift_;
        return std::visit(
            [m](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, detail::RandomScissionRates>) {
                    return static_cast<double>(m - 1);
                } else if constexpr (std::is_same_v<T, detail::BinaryChipOffRates>) {
                    return m == 1 ? 0.0 : static_cast<double>(m);
                } else if constexpr (std::is_same_v<T, detail::UniformBinaryRates>) {
                    return m == 1 ? r.a1 : std::pow(static_cast<double>(m), r.gamma);
                } else {
                    require(m <= r.a.size(), ErrorCode::IndexOutOfRange,
                            "table a_" + std::to_string(m) + " beyond stored range " + std::to_string(r.a.size()));
                    return r.a[m - 1];
                }
            },
            rates_);
    }

    double b(Index n, Index j) const {
        require(n >= 1 && j >= 1, ErrorCode::IndexOutOfRange, "b_{n,j} requires n, j >= 1");
        const Index nn = n + shift_;
        const Index jj = j + shift_;
        if (const auto* t = std::get_if<detail::TableRates>(&rates_)) {
            require(jj <= t->j_max, ErrorCode::IndexOutOfRange,
                    "table b_{n," + std::to_string(jj) + "} beyond j_max " + std::to_string(t->j_max));
            if (nn >= jj) return 0.0;
            const auto it = t->b.find({nn, jj});
            return it == t->b.end() ? 0.0 : it->second;
        }
        if (nn >= jj) return 0.0;
        return std::visit(
            [nn, jj](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, detail::BinaryChipOffRates>) {
                    if (jj == 2) return nn == 1 ? 2.0 : 0.0;
                    return (nn == 1 || nn == jj - 1) ? 1.0 : 0.0;
                } else if constexpr (std::is_same_v<T, detail::TableRates>) {
                    return 0.0; // handled above
                } else {
                    (void)r;
                    return 2.0 / static_cast<double>(jj - 1);
                }
            },
            rates_);
    }

    /// b_{n,j} as an exact rational: the defining fraction for builtins, the
    /// exact value of the stored double for tables.
    std::optional<Rational> exact_b(Index n, Index j) const {
        require(n >= 1 && j >= 1, ErrorCode::IndexOutOfRange, "b_{n,j} requires n, j >= 1");
        const Index nn = n + shift_;
        const Index jj = j + shift_;
        switch (kind()) {
        case ModelKind::Table: return Rational(b(n, j));
        case ModelKind::BinaryChipOff:
            if (nn >= jj) return Rational(0);
            if (jj == 2) return Rational(nn == 1 ? 2 : 0);
            return Rational((nn == 1 || nn == jj - 1) ? 1 : 0);
        default:
            if (nn >= jj) return Rational(0);
            return Rational(2, static_cast<long long>(jj - 1));
        }
    }

    /// True when sum_{n<j} n b_{n,j} <= j is known analytically for every j.
    /// Holds for all builtins at every shift; tables must be checked on their
    /// finite range instead.
    bool certified_mass_nonincreasing() const noexcept { return kind() != ModelKind::Table; }

    /// True when a_n is nondecreasing in n for n >= 2 by construction.
    bool monotone_rates_from_two() const noexcept {
        if (const auto* u = std::get_if<detail::UniformBinaryRates>(&rates_)) return u->gamma >= 0.0;
        return kind() != ModelKind::Table;
    }

    const detail::UniformBinaryRates* uniform_binary_parameters() const noexcept {
        return std::get_if<detail::UniformBinaryRates>(&rates_);
    }

    FragmentationModel shifted(Index by = 1) const {
        FragmentationModel copy = *this;
        copy.shift_ += by;
        return copy;
    }

    FragmentationModel unshifted(Index by = 1) const {
        require(shift_ >= by, ErrorCode::InvalidParameter, "unshifted: model shift is smaller than requested");
        FragmentationModel copy = *this;
        copy.shift_ -= by;
        return copy;
    }

    /// Snapshot of this model on [1, n_max] as a table (useful for editing rates).
    FragmentationModel tabulate(Index n_max) const {
        require(n_max >= 1, ErrorCode::InvalidParameter, "tabulate: n_max must be >= 1");
        std::vector<double> rates(n_max);
        std::vector<TableEntry> entries;
        for (Index j = 1; j <= n_max; ++j) {
            rates[j - 1] = a(j);
            for (Index n = 1; n < j; ++n) {
                const double v = b(n, j);
                if (v != 0.0) entries.push_back({n, j, v});
            }
        }
        return table(std::move(rates), entries, n_max);
    }

    /// Table model with a_n replaced.
    FragmentationModel with_rate(Index n, double value) const {
        require(kind() == ModelKind::Table && shift_ == 0, ErrorCode::InvalidParameter,
                "with_rate: only unshifted table models can be edited; tabulate() first");
        require(std::isfinite(value) && value >= 0.0, ErrorCode::InvalidParameter, "with_rate: a_n must be >= 0");
        FragmentationModel copy = *this;
        auto& t = std::get<detail::TableRates>(copy.rates_);
        require(n >= 1 && n <= t.a.size(), ErrorCode::IndexOutOfRange, "with_rate: index outside table");
        t.a[n - 1] = value;
        return copy;
    }

    std::string describe() const {
        std::string s = to_string(kind());
        if (const auto* u = std::get_if<detail::UniformBinaryRates>(&rates_)) {
            s += "(gamma=" + json(u->gamma).dump() + ",a1=" + json(u->a1).dump() + ")";
        } else if (const auto* t = std::get_if<detail::TableRates>(&rates_)) {
            s += "(n_max=" + std::to_string(t->a.size()) + ",j_max=" + std::to_string(t->j_max) + ")";
        }
        if (shift_ != 0) s += "+shift" + std::to_string(shift_);
        return s;
    }

    bool operator==(const FragmentationModel&) const = default;

private:
    using Rates = std::variant<detail::RandomScissionRates, detail::BinaryChipOffRates, detail::UniformBinaryRates,
                               detail::TableRates>;

    explicit FragmentationModel(Rates rates) : rates_(std::move(rates)) {}

    Rates rates_;
    Index shift_ = 0;
};

inline double eval_a(const FragmentationModel& model, Index n) { return model.a(n); }

inline double eval_b(const FragmentationModel& model, Index n, Index j) {
    require(j >= 2, ErrorCode::IndexOutOfRange, "b_{n,j} requires j >= 2");
    return model.b(n, j);
}

/// Daughter mass sum_{n<j} n b_{n,j}, exactly; nullopt when the model is not rational.
inline std::optional<Rational> exact_daughter_mass(const FragmentationModel& model, Index j) {
    Rational total = 0;
    for (Index n = 1; n < j; ++n) {
        const auto v = model.exact_b(n, j);
        if (!v) return std::nullopt;
        total += Rational(static_cast<long long>(n)) * *v;
    }
    return total;
}

// --- mass balance -----------------------------------------------------------

enum class MassClass { Conserving, Loss, Gain };

inline std::string to_string(MassClass c) {
    switch (c) {
    case MassClass::Conserving: return "conserving";
    case MassClass::Loss: return "loss";
    case MassClass::Gain: return "gain";
    }
    return "unknown";
}

struct MassBalanceReport {
    std::vector<double> lambda;               // lambda[k] is lambda_{k+2}
    std::vector<MassClass> classification;    // same indexing
    double a1 = 0.0;
    double tol = 0.0;
    bool conserving_global = false;
    bool nonincreasing = false;               // every lambda_j >= -tol
    Index j_first = 2;
    Index j_last = 2;

    double lambda_at(Index j) const {
        require(j >= j_first && j <= j_last, ErrorCode::IndexOutOfRange, "lambda_j outside checked range");
        return lambda[j - j_first];
    }

    json to_json() const {
        json classes = json::array();
        for (auto c : classification) classes.push_back(to_string(c));
        return {{"lambda", lambda},
                {"classification", classes},
                {"a1", a1},
                {"tol", tol},
                {"conserving_global", conserving_global},
                {"mass_nonincreasing", nonincreasing},
                {"j_range", {j_first, j_last}}};
    }
};

inline constexpr double kDefaultMassTol = 1e-10;

/// lambda_j = 1 - (1/j) sum_{n<j} n b_{n,j} for 2 <= j <= j_max.
inline MassBalanceReport mass_balance(const FragmentationModel& model, Index j_max, double tol = kDefaultMassTol) {
    require(j_max >= 2, ErrorCode::InvalidParameter, "mass_balance: j_max must be >= 2");
    require(tol > 0.0, ErrorCode::InvalidParameter, "mass_balance: tol must be > 0");
    MassBalanceReport report;
    report.tol = tol;
    report.j_last = j_max;
    report.a1 = model.a(1);
    double worst = 0.0;
    double lowest = std::numeric_limits<double>::infinity();
    for (Index j = 2; j <= j_max; ++j) {
        double daughters = 0.0;
        for (Index n = 1; n < j; ++n) daughters += static_cast<double>(n) * model.b(n, j);
        const double lambda = 1.0 - daughters / static_cast<double>(j);
        report.lambda.push_back(lambda);
        report.classification.push_back(std::abs(lambda) <= tol ? MassClass::Conserving
                                        : lambda > tol          ? MassClass::Loss
                                                                : MassClass::Gain);
        worst = std::max(worst, std::abs(lambda));
        lowest = std::min(lowest, lambda);
    }
    report.conserving_global = report.a1 <= tol && worst <= tol;
    report.nonincreasing = lowest >= -tol;
    return report;
}

// --- rate envelopes ---------------------------------------------------------

/// Running maximum c_n = max{a_1, ..., a_n}.
inline std::vector<double> c_sequence(std::span<const double> a) {
    std::vector<double> c(a.size());
    double running = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        running = i == 0 ? a[0] : std::max(running, a[i]);
        c[i] = running;
    }
    return c;
}

inline std::vector<double> rates(const FragmentationModel& model, Index n_max) {
    std::vector<double> a(n_max);
    for (Index n = 1; n <= n_max; ++n) a[n - 1] = model.a(n);
    return a;
}

inline std::vector<double> c_sequence(const FragmentationModel& model, Index n_max) {
    require(n_max >= 1, ErrorCode::InvalidParameter, "c_sequence: n_max must be >= 1");
    const auto a = rates(model, n_max);
    return c_sequence(std::span<const double>(a));
}

/// Finite-range stand-in for liminf a_n / c_n. It is a heuristic only: a
/// positive value is consistent with, not a proof of, equal domains.
struct DomainDiagnostic {
    double value = 1.0;
    Index window_first = 1;
    Index window_last = 1;

    json to_json() const {
        return {{"value", value}, {"window", {window_first, window_last}}, {"label", "trailing-window minimum of a_n/c_n"}};
    }
};

inline DomainDiagnostic domain_equality_diagnostic(const FragmentationModel& model, Index n_max) {
    require(n_max >= 1, ErrorCode::InvalidParameter, "domain_equality_diagnostic: n_max must be >= 1");
    const auto a = rates(model, n_max);
    const auto c = c_sequence(std::span<const double>(a));
    DomainDiagnostic d;
    d.window_first = n_max / 2 + 1;
    d.window_last = n_max;
    d.value = std::numeric_limits<double>::infinity();
    for (Index n = d.window_first; n <= n_max; ++n) {
        const double an = a[n - 1];
        const double cn = c[n - 1];
        d.value = std::min(d.value, cn == 0.0 ? 1.0 : an / cn);
    }
    return d;
}

} // namespace fragkin

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fragkin/weight.hpp"

namespace fragkin {

/// Finitely supported cluster distribution u = (u_1, ..., u_N) measured in l^1_w.
class StateVector {
public:
    StateVector(std::vector<double> coeffs, Weight weight) : coeffs_(std::move(coeffs)), weight_(std::move(weight)) {
        for (double v : coeffs_) require(std::isfinite(v), ErrorCode::InvalidParameter, "state entries must be finite");
    }

    /// e_n as a vector of length max(n, length).
    static StateVector basis(Index n, Weight weight, Index length = 0) {
        require(n >= 1, ErrorCode::IndexOutOfRange, "basis vector index must be >= 1");
        std::vector<double> v(std::max(n, length), 0.0);
        v[n - 1] = 1.0;
        return StateVector(std::move(v), std::move(weight));
    }

    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    const Weight& weight() const noexcept { return weight_; }
    Index size() const noexcept { return coeffs_.size(); }

    /// u_n, 1-based; zero beyond the stored length.
    double operator[](Index n) const {
        require(n >= 1, ErrorCode::IndexOutOfRange, "state index must be >= 1");
        return n <= coeffs_.size() ? coeffs_[n - 1] : 0.0;
    }

    /// Largest n with u_n != 0 (0 for the zero state).
    Index support() const noexcept {
        for (Index n = coeffs_.size(); n > 0; --n) {
            if (coeffs_[n - 1] != 0.0) return n;
        }
        return 0;
    }

    bool nonnegative() const noexcept {
        for (double v : coeffs_) {
            if (v < 0.0) return false;
        }
        return true;
    }

    /// P_N u, padded or cut to length N.
    StateVector truncated(Index length) const {
        std::vector<double> v(length, 0.0);
        for (Index i = 0; i < std::min(length, coeffs_.size()); ++i) v[i] = coeffs_[i];
        return StateVector(std::move(v), weight_);
    }

    StateVector with_weight(Weight weight) const { return StateVector(coeffs_, std::move(weight)); }

private:
    std::vector<double> coeffs_;
    Weight weight_;
};

inline double weighted_norm(std::span<const double> u, const Weight& w) {
    double total = 0.0;
    for (Index n = 1; n <= u.size(); ++n) total += w(n) * std::abs(u[n - 1]);
    return total;
}

/// M_1(u) = sum n u_n.
inline double moment_M1(const StateVector& u) {
    double total = 0.0;
    for (Index n = 1; n <= u.size(); ++n) total += static_cast<double>(n) * u[n];
    return total;
}

/// phi_w(u) = sum w_n u_n; equals wnorm for nonnegative u.
inline double phi_w(const StateVector& u) {
    double total = 0.0;
    for (Index n = 1; n <= u.size(); ++n) total += u.weight()(n) * u[n];
    return total;
}

inline double wnorm(const StateVector& u) { return weighted_norm(u.coeffs(), u.weight()); }

/// ||u - v||_w using u's weight; shorter vector is zero-padded.
inline double wdistance(const StateVector& u, const StateVector& v) {
    const Index len = std::max(u.size(), v.size());
    double total = 0.0;
    for (Index n = 1; n <= len; ++n) total += u.weight()(n) * std::abs(u[n] - v[n]);
    return total;
}

/// N x N upper-triangular realization of the generator:
///   G[n][n] = -a_n,  G[n][j] = a_j b_{n,j}  (j > n).
class TruncatedGenerator {
public:
    TruncatedGenerator(Index dim, std::vector<double> entries, Weight weight)
        : dim_(dim), entries_(std::move(entries)), weight_(std::move(weight)) {
        require(entries_.size() == dim_ * dim_, ErrorCode::LengthMismatch, "generator storage does not match dimension");
    }

    Index dim() const noexcept { return dim_; }
    const Weight& weight() const noexcept { return weight_; }

    /// 1-based entry access.
    double operator()(Index row, Index col) const {
        require(row >= 1 && col >= 1 && row <= dim_ && col <= dim_, ErrorCode::IndexOutOfRange,
                "generator entry outside dimension");
        return entries_[(row - 1) * dim_ + (col - 1)];
    }

    /// Row-major storage, 0-based.
    std::span<const double> data() const noexcept { return entries_; }

    /// y = G x on the leading `len` coordinates (len <= dim). Rows beyond the
    /// support of x are unaffected by it, so callers may work on a prefix.
    void apply(std::span<const double> x, std::span<double> y) const {
        const Index len = x.size();
        require(len <= dim_ && y.size() >= len, ErrorCode::LengthMismatch, "apply: vector longer than the generator");
        for (Index r = 0; r < len; ++r) {
            const double* row = entries_.data() + r * dim_;
            double acc = 0.0;
            for (Index c = r; c < len; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(x.size());
        apply(x, y);
        return y;
    }

    /// Decay rates a_n = -G[n][n].
    std::vector<double> rates() const {
        std::vector<double> a(dim_);
        for (Index n = 0; n < dim_; ++n) a[n] = -entries_[n * dim_ + n];
        return a;
    }

private:
    Index dim_;
    std::vector<double> entries_;
    Weight weight_;
};

inline TruncatedGenerator assemble_generator(const FragmentationModel& model, const Weight& weight, Index dim) {
    require(dim >= 1, ErrorCode::InvalidParameter, "assemble_generator: dimension must be >= 1");
    std::vector<double> entries(dim * dim, 0.0);
    for (Index j = 1; j <= dim; ++j) {
        const double aj = model.a(j);
        entries[(j - 1) * dim + (j - 1)] = -aj;
        for (Index n = 1; n < j; ++n) entries[(n - 1) * dim + (j - 1)] = aj * model.b(n, j);
    }
    return TruncatedGenerator(dim, std::move(entries), weight);
}

} // namespace fragkin

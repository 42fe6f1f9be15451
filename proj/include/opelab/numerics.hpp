#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opelab/errors.hpp"

namespace opelab {

/// Dense symmetric matrix, full row-major storage. Mutating accessors keep
/// both triangles in sync so a SymMatrix is symmetric by construction.
class SymMatrix {
public:
    explicit SymMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, 0.0) {
        if (dim < 1) throw std::invalid_argument("SymMatrix: dim must be >= 1");
    }

    static SymMatrix identity(int dim) {
        SymMatrix m(dim);
        for (int i = 0; i < dim; ++i) m.a_[idx(i, i, dim)] = 1.0;
        return m;
    }

    static SymMatrix diagonal(std::span<const double> d) {
        SymMatrix m(static_cast<int>(d.size()));
        for (int i = 0; i < m.dim_; ++i) m.a_[idx(i, i, m.dim_)] = d[i];
        return m;
    }

    /// Build from explicit rows; rejects asymmetry beyond 1e-12 absolute.
    static SymMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const int n = static_cast<int>(rows.size());
        SymMatrix m(n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(rows[i].size()) != n)
                throw std::invalid_argument("SymMatrix: rows must form a square matrix");
            for (int j = 0; j < n; ++j) m.a_[idx(i, j, n)] = rows[i][j];
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (std::abs(m(i, j) - m(j, i)) > 1e-12)
                    throw std::invalid_argument("SymMatrix: asymmetric entry at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
        return m;
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[idx(i, j, dim_)]; }

    void set(int i, int j, double v) {
        a_[idx(i, j, dim_)] = v;
        a_[idx(j, i, dim_)] = v;
    }

    /// A += weight * v vᵀ
    void add_outer(std::span<const double> v, double weight) {
        for (int i = 0; i < dim_; ++i) {
            const double wi = weight * v[i];
            for (int j = 0; j < dim_; ++j) a_[idx(i, j, dim_)] += wi * v[j];
        }
    }

    /// A += c * I
    void add_diagonal(double c) {
        for (int i = 0; i < dim_; ++i) a_[idx(i, i, dim_)] += c;
    }

    /// A + B (dims must match).
    SymMatrix plus(const SymMatrix& other) const {
        SymMatrix r(dim_);
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] + other.a_[k];
        return r;
    }

    SymMatrix scaled(double c) const {
        SymMatrix r(dim_);
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = c * a_[k];
        return r;
    }

    std::vector<double> matvec(std::span<const double> x) const {
        std::vector<double> y(dim_, 0.0);
        for (int i = 0; i < dim_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < dim_; ++j) acc += a_[idx(i, j, dim_)] * x[j];
            y[i] = acc;
        }
        return y;
    }

    bool operator==(const SymMatrix& other) const = default;

private:
    static std::size_t idx(int i, int j, int n) {
        return static_cast<std::size_t>(i) * n + j;
    }

    int dim_;
    std::vector<double> a_;
};

/// Cholesky factorization A = L Lᵀ of an SPD matrix. Factor once, solve many.
/// Throws NotPositiveDefinite when a pivot drops to <= 1e-14, which in this
/// codebase means the regularizer was lost or the input data is degenerate.
class Cholesky {
public:
    static constexpr double kPivotFloor = 1e-14;

    explicit Cholesky(const SymMatrix& a)
        : dim_(a.dim()), l_(static_cast<std::size_t>(dim_) * dim_, 0.0) {
        for (int j = 0; j < dim_; ++j) {
            double pivot = a(j, j);
            for (int k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
            if (pivot <= kPivotFloor)
                throw NotPositiveDefinite("Cholesky: pivot " + std::to_string(pivot) +
                                          " at column " + std::to_string(j));
            const double ljj = std::sqrt(pivot);
            lref(j, j) = ljj;
            for (int i = j + 1; i < dim_; ++i) {
                double acc = a(i, j);
                for (int k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
                lref(i, j) = acc / ljj;
            }
        }
    }

    int dim() const { return dim_; }

    std::vector<double> solve(std::span<const double> b) const {
        std::vector<double> x(b.begin(), b.end());
        // L y = b
        for (int i = 0; i < dim_; ++i) {
            double acc = x[i];
            for (int k = 0; k < i; ++k) acc -= l(i, k) * x[k];
            x[i] = acc / l(i, i);
        }
        // Lᵀ x = y
        for (int i = dim_ - 1; i >= 0; --i) {
            double acc = x[i];
            for (int k = i + 1; k < dim_; ++k) acc -= l(k, i) * x[k];
            x[i] = acc / l(i, i);
        }
        return x;
    }

    /// vᵀ A⁻¹ v computed as ‖L⁻¹v‖², nonnegative by construction.
    double inv_quad_form(std::span<const double> v) const {
        std::vector<double> y(v.begin(), v.end());
        double q = 0.0;
        for (int i = 0; i < dim_; ++i) {
            double acc = y[i];
            for (int k = 0; k < i; ++k) acc -= l(i, k) * y[k];
            y[i] = acc / l(i, i);
            q += y[i] * y[i];
        }
        return q;
    }

private:
    double l(int i, int j) const { return l_[static_cast<std::size_t>(i) * dim_ + j]; }
    double& lref(int i, int j) { return l_[static_cast<std::size_t>(i) * dim_ + j]; }

    int dim_;
    std::vector<double> l_;
};

/// Solve A x = b for SPD A. One refinement pass keeps the residual within
/// the contract ‖Ax − b‖∞ <= 1e-9 (1 + ‖b‖∞).
inline std::vector<double> solve_spd(const SymMatrix& a, std::span<const double> b) {
    if (static_cast<int>(b.size()) != a.dim())
        throw std::invalid_argument("solve_spd: length(b) != dim");
    const Cholesky chol(a);
    std::vector<double> x = chol.solve(b);
    std::vector<double> ax = a.matvec(x);
    std::vector<double> r(a.dim());
    for (int i = 0; i < a.dim(); ++i) r[i] = b[i] - ax[i];
    const std::vector<double> dx = chol.solve(r);
    for (int i = 0; i < a.dim(); ++i) x[i] += dx[i];
    return x;
}

inline double inv_quad_form(const SymMatrix& a, std::span<const double> v) {
    if (static_cast<int>(v.size()) != a.dim())
        throw std::invalid_argument("inv_quad_form: length(v) != dim");
    return Cholesky(a).inv_quad_form(v);
}

struct EigExtremes {
    double lambda_min;
    double lambda_max;
};

/// Extreme eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
/// Full spectrum is computed and the extremes returned; fine for the small
/// dims this library works with.
inline EigExtremes sym_eig_extremes(const SymMatrix& a) {
    const int n = a.dim();
    if (n == 1) return {a(0, 0), a(0, 0)};

    std::vector<double> w(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(i) * n + j] = a(i, j);

    auto at = [&](int i, int j) -> double& { return w[static_cast<std::size_t>(i) * n + j]; };
    auto off_norm = [&] {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += at(i, j) * at(i, j);
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (double v : w) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return {0.0, 0.0};
    const double tol = 1e-15 * scale * n;

    constexpr int kMaxSweeps = 64;
    int sweep = 0;
    while (off_norm() > tol) {
        if (++sweep > kMaxSweeps)
            throw NonConvergence("sym_eig_extremes: Jacobi did not converge in " +
                                 std::to_string(kMaxSweeps) + " sweeps");
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::abs(apq) <= tol / (n * n)) continue;
                const double tau = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double wkp = at(k, p), wkq = at(k, q);
                    at(k, p) = c * wkp - s * wkq;
                    at(k, q) = s * wkp + c * wkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double wpk = at(p, k), wqk = at(q, k);
                    at(p, k) = c * wpk - s * wqk;
                    at(q, k) = s * wpk + c * wqk;
                }
            }
        }
    }

    double lo = at(0, 0), hi = at(0, 0);
    for (int i = 1; i < n; ++i) {
        lo = std::min(lo, at(i, i));
        hi = std::max(hi, at(i, i));
    }
    return {lo, hi};
}

/// True iff lambda_min(A) >= -tol.
inline bool is_psd(const SymMatrix& a, double tol) {
    return sym_eig_extremes(a).lambda_min >= -tol;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

} // namespace opelab

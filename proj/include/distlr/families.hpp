#pragma once
//
// Matrix forms of the binomial, Poisson and chi-squared families and their
// identification with a divergence kernel.
//
//   binomial    f(k, q)   = C(n,k) q^k (1-q)^(n-k)          rows k = 0..n,     cols q
//   Poisson     f(k, lam) = exp(-lam) lam^k / k!            rows k = 0..k_max, cols lam
//   chi-squared f(x, k)   = x^(k/2-1) exp(-x/2) / (2^(k/2) Gamma(k/2))
//                                                           rows x,            cols k = 1..k_max
//
// Each entry factors exactly as row_factor(i) * col_factor(j) *
// exp(-n_eff D(p_i || q_j)), where D is KL, E or E* respectively. The
// Stirling form replaces the exact factors by their asymptotic prefactor.
//

#include <distlr/divergence.hpp>
#include <distlr/errors.hpp>
#include <distlr/partition.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>

namespace distlr {

struct Binomial {
    int n       = 0;
    int columns = 0; // q_j = (j + 1/2) / columns

    friend bool operator==(const Binomial &, const Binomial &) = default;
};

struct Poisson {
    int    k_max       = 0;
    double lambda_max  = 0.0;
    int    lambda_grid = 0; // lam_j = (j + 1) lambda_max / lambda_grid

    friend bool operator==(const Poisson &, const Poisson &) = default;
};

struct ChiSquared {
    double x_max  = 0.0;
    int    x_grid = 0; // x_i = (i + 1) x_max / x_grid
    int    k_max  = 0;

    friend bool operator==(const ChiSquared &, const ChiSquared &) = default;
};

using FamilySpec = std::variant<Binomial, Poisson, ChiSquared>;

inline FamilySpec make_binomial(int n, int columns = 0) {
    if (n < 1)
        throw domain_error("binomial: n must be >= 1");
    return Binomial{n, columns > 0 ? columns : n + 1};
}

inline FamilySpec make_poisson(int k_max, double lambda_max, int lambda_grid) {
    if (k_max < 0 || !(lambda_max > 0.0) || lambda_grid < 1)
        throw domain_error("poisson: need k_max >= 0, lambda_max > 0, lambda_grid >= 1");
    return Poisson{k_max, lambda_max, lambda_grid};
}

inline FamilySpec make_chi_squared(double x_max, int x_grid, int k_max) {
    if (!(x_max > 0.0) || x_grid < 1 || k_max < 1)
        throw domain_error("chisq: need x_max > 0, x_grid >= 1, k_max >= 1");
    return ChiSquared{x_max, x_grid, k_max};
}

inline std::string_view family_name(const FamilySpec &spec) {
    struct V {
        std::string_view operator()(const Binomial &) const { return "binomial"; }
        std::string_view operator()(const Poisson &) const { return "poisson"; }
        std::string_view operator()(const ChiSquared &) const { return "chisq"; }
    };
    return std::visit(V{}, spec);
}

inline std::int64_t rows(const FamilySpec &spec) {
    struct V {
        std::int64_t operator()(const Binomial &b) const { return b.n + 1; }
        std::int64_t operator()(const Poisson &p) const { return p.k_max + 1; }
        std::int64_t operator()(const ChiSquared &c) const { return c.x_grid; }
    };
    return std::visit(V{}, spec);
}

inline std::int64_t cols(const FamilySpec &spec) {
    struct V {
        std::int64_t operator()(const Binomial &b) const { return b.columns; }
        std::int64_t operator()(const Poisson &p) const { return p.lambda_grid; }
        std::int64_t operator()(const ChiSquared &c) const { return c.k_max; }
    };
    return std::visit(V{}, spec);
}

// Natural row / column variable: (k, q), (k, lambda), (x, k).
inline double row_value(const FamilySpec &spec, std::int64_t i) {
    struct V {
        std::int64_t i;
        double       operator()(const Binomial &) const { return double(i); }
        double       operator()(const Poisson &) const { return double(i); }
        double       operator()(const ChiSquared &c) const { return double(i + 1) * c.x_max / c.x_grid; }
    };
    return std::visit(V{i}, spec);
}

inline double col_value(const FamilySpec &spec, std::int64_t j) {
    struct V {
        std::int64_t j;
        double       operator()(const Binomial &b) const { return (double(j) + 0.5) / b.columns; }
        double       operator()(const Poisson &p) const { return double(j + 1) * p.lambda_max / p.lambda_grid; }
        double       operator()(const ChiSquared &) const { return double(j + 1); }
    };
    return std::visit(V{j}, spec);
}

inline void check_indices(const FamilySpec &spec, std::int64_t i, std::int64_t j) {
    if (i < 0 || i >= rows(spec) || j < 0 || j >= cols(spec))
        throw domain_error("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range for " +
                           std::string(family_name(spec)) + " matrix " + std::to_string(rows(spec)) + "x" +
                           std::to_string(cols(spec)));
}

// Exact entry, evaluated in log space.
inline double entry_exact(const FamilySpec &spec, std::int64_t i, std::int64_t j) {
    check_indices(spec, i, j);
    struct V {
        std::int64_t i, j;
        const FamilySpec *spec;
        double operator()(const Binomial &b) const {
            const double q = col_value(*spec, j);
            const double n = b.n, k = double(i);
            if (q == 0.0)
                return i == 0 ? 1.0 : 0.0;
            if (q == 1.0)
                return i == b.n ? 1.0 : 0.0;
            const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
            return std::exp(lc + k * std::log(q) + (n - k) * std::log1p(-q));
        }
        double operator()(const Poisson &) const {
            const double lam = col_value(*spec, j);
            const double k   = double(i);
            return std::exp(-lam + k * std::log(lam) - std::lgamma(k + 1.0));
        }
        double operator()(const ChiSquared &) const {
            const double x    = row_value(*spec, i);
            const double half = 0.5 * double(j + 1);
            return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * std::numbers::ln2 - std::lgamma(half));
        }
    };
    return std::visit(V{i, j, &spec}, spec);
}

// How a family maps onto exp(-n_eff D(p||q)).
struct KernelMap {
    FamilySpec     spec;
    DivergenceKind kind  = DivergenceKind::KL;
    double         n_eff = 1.0;

    double p_of_row(std::int64_t i) const {
        struct V {
            std::int64_t i;
            const FamilySpec *s;
            double operator()(const Binomial &b) const { return double(i) / b.n; }
            double operator()(const Poisson &) const { return double(i); }
            double operator()(const ChiSquared &) const { return 0.5 * row_value(*s, i); }
        };
        return std::visit(V{i, &spec}, spec);
    }

    double q_of_col(std::int64_t j) const {
        struct V {
            std::int64_t j;
            const FamilySpec *s;
            double operator()(const Binomial &) const { return col_value(*s, j); }
            double operator()(const Poisson &) const { return col_value(*s, j); }
            double operator()(const ChiSquared &) const { return 0.5 * double(j + 1) - 1.0; }
        };
        return std::visit(V{j, &spec}, spec);
    }

    // Rows (or columns) where the Stirling form is singular; the matrix
    // stores them densely.
    bool singular_row(std::int64_t i) const {
        if (std::holds_alternative<Binomial>(spec))
            return i == 0 || i == std::get<Binomial>(spec).n;
        if (std::holds_alternative<Poisson>(spec))
            return i == 0;
        return false;
    }

    bool singular_col(std::int64_t j) const { return std::holds_alternative<ChiSquared>(spec) && j + 1 <= 2; }

    // Asymptotic prefactor c_{n,p}: 1/sqrt(2 pi n p (1-p)), 1/sqrt(2 pi k),
    // 1/(2 sqrt(2 pi (k/2 - 1))).
    double stirling_prefactor(std::int64_t i, std::int64_t j) const {
        if (singular_row(i) || singular_col(j))
            throw domain_error("Stirling-form undefined here: singular row/column (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")");
        if (std::holds_alternative<Binomial>(spec)) {
            const double p = p_of_row(i);
            return 1.0 / std::sqrt(2.0 * std::numbers::pi * n_eff * p * (1.0 - p));
        }
        if (std::holds_alternative<Poisson>(spec))
            return 1.0 / std::sqrt(2.0 * std::numbers::pi * p_of_row(i));
        return 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::pi * q_of_col(j)));
    }

    // Exact factors with entry = row_factor * col_factor * exp(-n_eff D).
    double row_factor(std::int64_t i) const {
        if (auto *b = std::get_if<Binomial>(&spec)) {
            const double n = b->n, k = double(i), p = k / n;
            const double ent = (k == 0.0 ? 0.0 : k * std::log(p)) + (k == n ? 0.0 : (n - k) * std::log1p(-p));
            return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + ent);
        }
        if (std::holds_alternative<Poisson>(spec)) {
            const double k = double(i);
            return std::exp((k == 0.0 ? 0.0 : k * std::log(k)) - k - std::lgamma(k + 1.0));
        }
        return 1.0;
    }

    double col_factor(std::int64_t j) const {
        if (std::holds_alternative<ChiSquared>(spec)) {
            const double q = q_of_col(j);
            if (q < 0.0)
                throw domain_error("chi-squared column k = 1 has no kernel factorisation");
            return 0.5 * std::exp((q == 0.0 ? 0.0 : q * std::log(q)) - q - std::lgamma(q + 1.0));
        }
        return 1.0;
    }
};

inline KernelMap kernel_map(const FamilySpec &spec) {
    KernelMap m;
    m.spec = spec;
    if (auto *b = std::get_if<Binomial>(&spec)) {
        m.kind  = DivergenceKind::KL;
        m.n_eff = b->n;
    } else if (std::holds_alternative<Poisson>(spec)) {
        m.kind  = DivergenceKind::E;
        m.n_eff = 1.0;
    } else {
        m.kind  = DivergenceKind::EStar;
        m.n_eff = 1.0;
    }
    return m;
}

// Stirling-form entry: prefactor * exp(-n_eff D(p||q)).
inline double entry_stirling(const FamilySpec &spec, std::int64_t i, std::int64_t j) {
    check_indices(spec, i, j);
    const auto m   = kernel_map(spec);
    const double c = m.stirling_prefactor(i, j);
    return c * std::exp(-m.n_eff * eval(m.kind, m.p_of_row(i), m.q_of_col(j)));
}

// Partition domain in kernel coordinates covering every row and column.
inline DomainDescriptor partition_domain(const FamilySpec &spec, int finest_level) {
    if (std::holds_alternative<Binomial>(spec))
        return DomainDescriptor::unit_square(finest_level);
    const auto   m    = kernel_map(spec);
    const double pmax = m.p_of_row(rows(spec) - 1);
    const double qmax = m.q_of_col(cols(spec) - 1);
    double       a    = 1.0;
    while (a < std::max(pmax, qmax))
        a *= 2.0;
    return DomainDescriptor::quarter_plane(a, finest_level);
}

} // namespace distlr

#pragma once
//
// Separated approximations sum_i alpha_i(p) beta_i(q) of exp(-n D) on a
// partition block, sampled on tensor grids.
//
// build_constructive() follows the existence argument directly: rescale the
// block to the unit configuration, cut the region where the kernel exceeds
// eps at the threshold points (p_M, q_M), interpolate exp(-x) on [0, L] by a
// Chebyshev polynomial h_d and expand h_d(n' E) through the separable form
//   E(p||q) = (p ln p - p + 1) + (q - 1) + p (-ln q).
// The expansion is carried out in the Chebyshev basis by the three-term
// recurrence on factored matrices, truncating each T_j(y) to the accuracy
// its tail coefficients require. A direct monomial expansion has the same
// (d+1)(d+2)(d+3)/6 terms but loses all digits to cancellation once
// L = n' E(p_M||q_M) is more than a few units.
//
// aca_build() is the practical alternative: adaptive cross approximation
// with partial pivoting on an entry oracle, followed by SVD recompression.
//

#include <distlr/chebyshev.hpp>
#include <distlr/divergence.hpp>
#include <distlr/errors.hpp>
#include <distlr/lowrank.hpp>
#include <distlr/partition.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace distlr {

enum class RankConvention { RelativeToSigma1, Absolute };

struct SeparatedApprox {
    std::vector<double> p_grid;
    std::vector<double> q_grid;
    Matrix              alpha; // p_grid.size() x rank
    Matrix              beta;  // q_grid.size() x rank
    double              target_eps = 0.0;

    // diagnostics
    std::size_t raw_terms = 0; // terms before recompression
    int         degree    = 0; // Chebyshev degree (constructive route)
    std::size_t peak_rank = 0; // largest intermediate rank (constructive route)

    Eigen::Index rank() const { return alpha.cols(); }
    Matrix       dense() const { return alpha * beta.transpose(); }
};

// exp(-n * divergence) with the limits exp(-inf) = 0 where the divergence
// is infinite.
inline double kernel_value(DivergenceKind kind, double n, double p, double q) {
    switch (kind) {
    case DivergenceKind::E:
        if (q == 0.0 && p > 0.0)
            return 0.0;
        break;
    case DivergenceKind::EStar:
        if (p == 0.0 && q > 0.0)
            return 0.0;
        break;
    case DivergenceKind::EReflected:
        if (q == 1.0 && p < 1.0)
            return 0.0;
        break;
    case DivergenceKind::KL:
        if ((q == 0.0 && p > 0.0) || (q == 1.0 && p < 1.0))
            return 0.0;
        if (q == 0.0 || q == 1.0)
            return 1.0;
        break;
    }
    return std::exp(-n * eval(kind, p, q));
}

inline Matrix sample_kernel(DivergenceKind kind, double n, std::span<const double> p_grid, std::span<const double> q_grid) {
    Matrix K(static_cast<Eigen::Index>(p_grid.size()), static_cast<Eigen::Index>(q_grid.size()));
    for (std::size_t j = 0; j < q_grid.size(); ++j)
        for (std::size_t i = 0; i < p_grid.size(); ++i)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel_value(kind, n, p_grid[i], q_grid[j]);
    return K;
}

inline std::vector<double> uniform_grid(double lo, double hi, int points) {
    if (points < 2)
        throw domain_error("grid needs at least two points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    g.back() = hi;
    return g;
}

inline std::size_t expansion_term_count(int degree) {
    const auto d = static_cast<std::size_t>(degree);
    return (d + 1) * (d + 2) * (d + 3) / 6;
}

// ---------------------------------------------------------------------------
// numerical rank
// ---------------------------------------------------------------------------

inline Vector singular_values(const Matrix &A) {
    if (A.size() == 0)
        return Vector(0);
    if (!A.allFinite())
        throw domain_error("numerical_rank: matrix has non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(A);
    return svd.singularValues();
}

inline Eigen::Index rank_from_singular_values(const Vector &sigma, double eps, RankConvention convention) {
    if (sigma.size() == 0 || sigma(0) == 0.0)
        return 0;
    return truncation_rank(sigma, eps, convention == RankConvention::Absolute ? Truncation::Absolute : Truncation::RelativeToSigma1);
}

inline Eigen::Index numerical_rank(const Matrix &A, double eps, RankConvention convention = RankConvention::RelativeToSigma1) {
    return rank_from_singular_values(singular_values(A), eps, convention);
}

// ---------------------------------------------------------------------------
// constructive route
// ---------------------------------------------------------------------------

namespace detail {

struct ExpansionResult {
    LowRank     factors;
    int         degree    = 0;
    std::size_t peak_rank = 0;
};

// exp(-n E(x||y)) for x on xs, y on ys, where the box touches the diagonal
// at (c, c): lower regime x >= c >= y, upper regime x <= c <= y.
inline ExpansionResult expand_e_box(double c, Regime regime, double n, double eps, std::span<const double> xs,
                                    std::span<const double> ys) {
    const auto      nx = static_cast<Eigen::Index>(xs.size());
    const auto      ny = static_cast<Eigen::Index>(ys.size());
    ExpansionResult out;
    out.factors = LowRank::zero(nx, ny);

    const double nprime = n * c;
    const double level  = std::log(1.0 / eps) / nprime;
    const auto   thr    = solve_thresholds(regime, level);

    // region of the unit configuration where the kernel can exceed eps
    std::vector<Eigen::Index> in_x, in_y;
    for (Eigen::Index i = 0; i < nx; ++i) {
        const double x = xs[static_cast<std::size_t>(i)] / c;
        if (regime == Regime::Lower ? x <= thr.p_m : x >= thr.p_m)
            in_x.push_back(i);
    }
    for (Eigen::Index j = 0; j < ny; ++j) {
        const double y = ys[static_cast<std::size_t>(j)] / c;
        if (regime == Regime::Lower ? (y > 0.0 && std::log(y) >= thr.log_q_m) : y <= thr.q_m)
            in_y.push_back(j);
    }
    if (in_x.empty() || in_y.empty())
        return out;

    const double length = nprime * corner_divergence(thr);
    const auto   cheb   = cheb_exp(length, 0.25 * eps);
    const int    d      = cheb.degree;
    out.degree          = d;

    const auto mx = static_cast<Eigen::Index>(in_x.size());
    const auto my = static_cast<Eigen::Index>(in_y.size());

    LowRank T0{Matrix::Ones(mx, 1), Matrix::Ones(my, 1)};
    LowRank S{cheb.coefficients[0] * T0.U, T0.V};

    if (d >= 1) {
        // y = 2 n' E / L - 1 as a rank-3 factorisation
        const double s = length > 0.0 ? 2.0 * nprime / length : 0.0;
        LowRank      Y{Matrix(mx, 3), Matrix(my, 3)};
        for (Eigen::Index a = 0; a < mx; ++a) {
            const double x   = xs[static_cast<std::size_t>(in_x[static_cast<std::size_t>(a)])] / c;
            const double xlx = x == 0.0 ? 0.0 : x * std::log(x);
            Y.U(a, 0)        = s * (xlx - x + 1.0) - 1.0;
            Y.U(a, 1)        = 1.0;
            Y.U(a, 2)        = s * x;
        }
        for (Eigen::Index b = 0; b < my; ++b) {
            const double y = ys[static_cast<std::size_t>(in_y[static_cast<std::size_t>(b)])] / c;
            Y.V(b, 0)      = 1.0;
            Y.V(b, 1)      = s * (y - 1.0);
            Y.V(b, 2)      = -std::log(y);
        }
        Y = recompress(Y, 1e-15, Truncation::RelativeToSigma1);

        // tail weights: an error delta in T_j reaches the sum with weight
        // sum_{m >= 0} |c_{j+m}| (m + 1)
        std::vector<double> weight(static_cast<std::size_t>(d) + 1, 0.0);
        for (int j = 0; j <= d; ++j)
            for (int m = 0; j + m <= d; ++m)
                weight[static_cast<std::size_t>(j)] += std::abs(cheb.coefficients[static_cast<std::size_t>(j + m)]) * (m + 1);
        const double budget = 0.25 * eps / (d + 1);
        auto         step_tol = [&](int j) {
            return budget / std::max(weight[static_cast<std::size_t>(j)], std::numeric_limits<double>::min());
        };

        LowRank prev = T0;
        LowRank cur  = recompress(Y, step_tol(1), Truncation::Absolute);
        S            = recompress(add(S, cur, cheb.coefficients[1]), budget, Truncation::Absolute);
        out.peak_rank = std::max<std::size_t>(1, static_cast<std::size_t>(cur.rank()));
        for (int j = 1; j < d; ++j) {
            LowRank yt   = hadamard(Y, cur);
            LowRank next = recompress(add(LowRank{2.0 * yt.U, yt.V}, prev, -1.0), step_tol(j + 1), Truncation::Absolute);
            prev         = std::move(cur);
            cur          = std::move(next);
            out.peak_rank = std::max(out.peak_rank, static_cast<std::size_t>(cur.rank()));
            S = recompress(add(S, cur, cheb.coefficients[static_cast<std::size_t>(j + 1)]), budget, Truncation::Absolute);
        }
    }
    out.peak_rank = std::max(out.peak_rank, static_cast<std::size_t>(S.rank()));

    out.factors.U = Matrix::Zero(nx, S.rank());
    out.factors.V = Matrix::Zero(ny, S.rank());
    for (Eigen::Index a = 0; a < mx; ++a)
        out.factors.U.row(in_x[static_cast<std::size_t>(a)]) = S.U.row(a);
    for (Eigen::Index b = 0; b < my; ++b)
        out.factors.V.row(in_y[static_cast<std::size_t>(b)]) = S.V.row(b);
    return out;
}

} // namespace detail

// Constructive separated approximation of exp(-n D) on a block for
// D in {E, E*, E(1-p||1-q)}, sampled on the given grids (which must lie in
// the block). The result is recompressed at absolute threshold eps.
inline SeparatedApprox build_constructive(const Block &block, DivergenceKind kind, double n, double eps,
                                          std::span<const double> p_grid, std::span<const double> q_grid) {
    if (!(n > 0.0))
        throw domain_error("build_constructive: n must be positive");
    if (!(eps > 0.0 && eps < 1.0))
        throw domain_error("build_constructive: eps must lie in (0, 1)");
    if (kind == DivergenceKind::KL)
        throw domain_error("build_constructive: KL blocks are built with build_kl (product of E and reflected E)");

    const bool odd = block.parity == Parity::Odd;
    const double c = block.corner();

    detail::ExpansionResult r;
    switch (kind) {
    case DivergenceKind::E:
        r = detail::expand_e_box(c, odd ? Regime::Lower : Regime::Upper, n, eps, p_grid, q_grid);
        break;
    case DivergenceKind::EStar: {
        // E*(p||q) = E(q||p): the roles of the two axes swap
        r = detail::expand_e_box(c, odd ? Regime::Upper : Regime::Lower, n, eps, q_grid, p_grid);
        std::swap(r.factors.U, r.factors.V);
        break;
    }
    case DivergenceKind::EReflected: {
        // E(1-p||1-q) on the mirrored block with corner 1 - c
        std::vector<double> xs(p_grid.size()), ys(q_grid.size());
        std::transform(p_grid.begin(), p_grid.end(), xs.begin(), [](double p) { return 1.0 - p; });
        std::transform(q_grid.begin(), q_grid.end(), ys.begin(), [](double q) { return 1.0 - q; });
        r = detail::expand_e_box(1.0 - c, odd ? Regime::Upper : Regime::Lower, n, eps, xs, ys);
        break;
    }
    case DivergenceKind::KL: break;
    }

    SeparatedApprox out;
    out.p_grid.assign(p_grid.begin(), p_grid.end());
    out.q_grid.assign(q_grid.begin(), q_grid.end());
    out.target_eps = eps;
    out.degree     = r.degree;
    out.raw_terms  = r.factors.rank() == 0 ? 0 : expansion_term_count(r.degree);
    out.peak_rank  = r.peak_rank;
    auto lr        = recompress(r.factors, eps, Truncation::Absolute);
    out.alpha      = std::move(lr.U);
    out.beta       = std::move(lr.V);
    return out;
}

inline SeparatedApprox build_constructive(const Block &block, DivergenceKind kind, double n, double eps, int grid_size) {
    const auto pg = uniform_grid(block.p_lo, block.p_hi, grid_size);
    const auto qg = uniform_grid(block.q_lo, block.q_hi, grid_size);
    return build_constructive(block, kind, n, eps, pg, qg);
}

// Pairwise products of the two expansions' terms, recompressed at absolute
// threshold eps. raw_terms records rank(a) * rank(b).
inline SeparatedApprox build_product(const SeparatedApprox &a, const SeparatedApprox &b, double eps) {
    if (a.p_grid != b.p_grid || a.q_grid != b.q_grid)
        throw domain_error("build_product: factors are sampled on different grids");
    const LowRank raw = hadamard(LowRank{a.alpha, a.beta}, LowRank{b.alpha, b.beta});

    SeparatedApprox out;
    out.p_grid     = a.p_grid;
    out.q_grid     = a.q_grid;
    out.target_eps = eps;
    out.raw_terms  = static_cast<std::size_t>(raw.rank());
    out.degree     = std::max(a.degree, b.degree);
    out.peak_rank  = static_cast<std::size_t>(raw.rank());
    auto lr        = recompress(raw, eps, Truncation::Absolute);
    out.alpha      = std::move(lr.U);
    out.beta       = std::move(lr.V);
    return out;
}

// exp(-n D(p||q)) = exp(-n E(p||q)) exp(-n E(1-p||1-q)) on a unit-square block.
inline SeparatedApprox build_kl(const Block &block, double n, double eps, std::span<const double> p_grid,
                                std::span<const double> q_grid) {
    const auto e = build_constructive(block, DivergenceKind::E, n, 0.5 * eps, p_grid, q_grid);
    const auto r = build_constructive(block, DivergenceKind::EReflected, n, 0.5 * eps, p_grid, q_grid);
    return build_product(e, r, eps);
}

// ---------------------------------------------------------------------------
// adaptive cross approximation
// ---------------------------------------------------------------------------

using EntryOracle = std::function<double(Eigen::Index, Eigen::Index)>;

struct AcaOptions {
    // the cross iteration runs to inner_factor * eps before recompression
    double inner_factor = 1e-2;
    // rows probed after a vanishing residual row before stopping
    int extra_probes = 3;
    // threshold rule of the final SVD recompression
    Truncation recompression = Truncation::RelativeToSigma1;
};

namespace detail {

struct AcaRaw {
    LowRank factors;
    bool    converged = false;
};

inline AcaRaw aca_partial_pivot(const EntryOracle &entry, Eigen::Index rows, Eigen::Index cols, double tol, int extra_probes) {
    std::vector<Vector> us, vs;
    std::vector<char>   used(static_cast<std::size_t>(rows), 0);
    const Eigen::Index  max_rank = std::min(rows, cols);
    double              norm2    = 0.0;
    bool                converged = false;

    auto next_unused = [&](Eigen::Index from) -> Eigen::Index {
        for (Eigen::Index s = 0; s < rows; ++s) {
            const Eigen::Index i = (from + s) % rows;
            if (!used[static_cast<std::size_t>(i)])
                return i;
        }
        return -1;
    };

    // first pivot row: largest entry of the middle column
    Eigen::Index pivot_row = 0;
    {
        const Eigen::Index j0   = cols / 2;
        double             best = -1.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double v = std::abs(entry(i, j0));
            if (v > best) {
                best      = v;
                pivot_row = i;
            }
        }
    }

    int probes = 0;
    while (static_cast<Eigen::Index>(us.size()) < max_rank) {
        used[static_cast<std::size_t>(pivot_row)] = 1;
        Vector row(cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            row(j) = entry(pivot_row, j);
        for (std::size_t l = 0; l < us.size(); ++l)
            row -= us[l](pivot_row) * vs[l];

        Eigen::Index pivot_col = 0;
        const double pivot_abs = row.cwiseAbs().maxCoeff(&pivot_col);
        const double negligible = us.empty() ? 0.0 : tol * std::sqrt(norm2) / std::sqrt(double(rows) * double(cols));
        if (!(pivot_abs > negligible)) {
            // nothing left in this row; probe a few spread-out rows
            if (probes >= extra_probes) {
                converged = true;
                break;
            }
            ++probes;
            const Eigen::Index next = next_unused(pivot_row + std::max<Eigen::Index>(1, rows / (extra_probes + 1)));
            if (next < 0) {
                converged = true;
                break;
            }
            pivot_row = next;
            continue;
        }
        probes = 0;

        Vector v = row / row(pivot_col);
        Vector u(rows);
        for (Eigen::Index i = 0; i < rows; ++i)
            u(i) = entry(i, pivot_col);
        for (std::size_t l = 0; l < us.size(); ++l)
            u -= vs[l](pivot_col) * us[l];

        double cross = 0.0;
        for (std::size_t l = 0; l < us.size(); ++l)
            cross += u.dot(us[l]) * v.dot(vs[l]);
        const double un = u.norm(), vn = v.norm();
        norm2 += 2.0 * cross + un * un * vn * vn;
        us.push_back(std::move(u));
        vs.push_back(std::move(v));

        if (un * vn <= tol * std::sqrt(std::max(norm2, 0.0))) {
            converged = true;
            break;
        }

        // next pivot: largest residual in the new column among unused rows
        Eigen::Index best_i = -1;
        double       best   = -1.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (used[static_cast<std::size_t>(i)])
                continue;
            const double a = std::abs(us.back()(i));
            if (a > best) {
                best   = a;
                best_i = i;
            }
        }
        if (best_i < 0) {
            converged = true;
            break;
        }
        pivot_row = best_i;
    }

    AcaRaw out;
    out.converged = converged;
    out.factors.U.resize(rows, static_cast<Eigen::Index>(us.size()));
    out.factors.V.resize(cols, static_cast<Eigen::Index>(vs.size()));
    for (std::size_t l = 0; l < us.size(); ++l) {
        out.factors.U.col(static_cast<Eigen::Index>(l)) = us[l];
        out.factors.V.col(static_cast<Eigen::Index>(l)) = vs[l];
    }
    return out;
}

} // namespace detail

// Adaptive cross approximation of the rows x cols block behind `entry`,
// recompressed at eps. Falls back to a dense truncated SVD when the cross
// iteration reaches full rank without meeting its tolerance.
inline SeparatedApprox aca_build(const EntryOracle &entry, Eigen::Index rows, Eigen::Index cols, double eps,
                                 const AcaOptions &options = {}) {
    if (rows <= 0 || cols <= 0)
        throw domain_error("aca_build: empty block");
    if (!(eps > 0.0))
        throw domain_error("aca_build: eps must be positive");

    SeparatedApprox out;
    out.target_eps = eps;
    out.p_grid.resize(static_cast<std::size_t>(rows));
    out.q_grid.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < rows; ++i)
        out.p_grid[static_cast<std::size_t>(i)] = static_cast<double>(i);
    for (Eigen::Index j = 0; j < cols; ++j)
        out.q_grid[static_cast<std::size_t>(j)] = static_cast<double>(j);

    auto raw = detail::aca_partial_pivot(entry, rows, cols, options.inner_factor * eps, options.extra_probes);
    out.raw_terms = static_cast<std::size_t>(raw.factors.rank());

    LowRank lr;
    if (raw.converged) {
        lr = recompress(raw.factors, eps, options.recompression);
    } else {
        Matrix A(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                A(i, j) = entry(i, j);
        lr = recompress(A, Matrix::Identity(cols, cols), eps, options.recompression);
    }
    out.alpha = std::move(lr.U);
    out.beta  = std::move(lr.V);
    return out;
}

} // namespace distlr

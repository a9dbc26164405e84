// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <distlr/distlr.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace distlr;

namespace {

struct Outcome {
    bool        pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char *f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double max_abs(const Matrix &A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

double r_squared(const std::vector<double> &x, const std::vector<double> &y) {
    const double n  = double(x.size());
    double       mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        mx += x[i] / n, my += y[i] / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
}

FamilySpec desk_spec(std::string_view family) {
    if (family == "binomial")
        return make_binomial(1024);
    if (family == "poisson")
        return make_poisson(1024, 1024.0, 1024);
    return make_chi_squared(1024.0, 1024, 1024);
}

// singular values of every off-diagonal block on the native grid
std::vector<Vector> block_spectra(const FamilySpec &spec) {
    const auto          layout = make_layout(spec);
    std::vector<Vector> out;
    out.reserve(layout.offdiagonal.size());
    for (const Slot &s : layout.offdiagonal)
        out.push_back(singular_values(dense_block(spec, s.rows, s.cols)));
    return out;
}

int max_rank(const std::vector<Vector> &spectra, double eps) {
    int r = 0;
    for (const auto &s : spectra)
        r = std::max(r, int(rank_from_singular_values(s, eps, RankConvention::RelativeToSigma1)));
    return r;
}

Outcome ratio_limits_lower() {
    const auto   t0 = std::chrono::steady_clock::now();
    const double lo = ratio(Regime::Lower, 1e-8), hi = ratio(Regime::Lower, 1e4);
    const double dt = seconds_since(t0);
    return {lo >= 3.92 && lo <= 4.08 && hi >= 2.0 && hi <= 2.01 && dt < 1.0,
            fmt("ratio(1e-8)=%.6f ratio(1e4)=%.6f time=%.3fs", lo, hi, dt)};
}

Outcome ratio_limits_upper() {
    const auto   t0 = std::chrono::steady_clock::now();
    const double lo = ratio(Regime::Upper, 1e-8), hi = ratio(Regime::Upper, 1e4);
    const double dt = seconds_since(t0);
    return {lo >= 3.92 && lo <= 4.08 && hi <= 1e-3 && dt < 1.0,
            fmt("ratio(1e-8)=%.6f ratio(1e4)=%.3g time=%.3fs", lo, hi, dt)};
}

Outcome ratio_bounded() {
    const auto t0 = std::chrono::steady_clock::now();
    double     worst = 0.0, at = 0.0;
    for (int i = 0; i <= 32; ++i) {
        const double m = std::pow(10.0, -8.0 + 16.0 * i / 32.0);
        for (auto regime : {Regime::Lower, Regime::Upper}) {
            const double r = ratio(regime, m);
            if (r > worst)
                worst = r, at = m;
        }
    }
    const double dt = seconds_since(t0);
    return {worst <= 6.0 && dt < 1.0, fmt("max ratio=%.4f at M=%.3g over 33 points, time=%.3fs", worst, at, dt)};
}

Outcome rank_map(std::string_view family) {
    const auto t0      = std::chrono::steady_clock::now();
    const auto spectra = block_spectra(desk_spec(family));
    const int  r       = max_rank(spectra, 1e-9);
    const double dt    = seconds_since(t0);
    return {r <= 12 && dt < 300.0,
            fmt("%zu blocks, max rank %d at eps=1e-9 (cap 12, target 10%s), time=%.1fs", spectra.size(), r,
                r <= 10 ? " met" : " missed", dt)};
}

Outcome eps_linearity() {
    const auto         t0 = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool               ok = true;
    for (const char *family : {"binomial", "poisson", "chisq"}) {
        const auto          spectra = block_spectra(desk_spec(family));
        std::vector<double> x, y;
        std::string         ranks;
        for (int t = 3; t <= 12; ++t) {
            x.push_back(t * std::log(10.0));
            y.push_back(max_rank(spectra, std::pow(10.0, -t)));
            ranks += std::to_string(int(y.back())) + (t < 12 ? "," : "");
        }
        const double r2 = r_squared(x, y);
        ok              = ok && r2 >= 0.9;
        detail << family << " R2=" << fmt("%.4f", r2) << " [" << ranks << "]; ";
    }
    const double dt = seconds_since(t0);
    detail << fmt("time=%.1fs", dt);
    return {ok && dt < 900.0, detail.str()};
}

Outcome constructive_soundness() {
    double worst_err = 0.0;
    int    worst_gap = -100;
    bool   ok        = true;
    for (int k : {1, 0})
        for (double np : {1.0, 32.0, 1024.0})
            for (double eps : {1e-4, 1e-6}) {
                // unit configuration: (1,2)x(0,1) for k = 1, (0,1)x(1,2) for k = 0
                const Block  b   = make_block(0, k);
                const auto   sa  = build_constructive(b, DivergenceKind::E, np, eps, 64);
                const Matrix K   = sample_kernel(DivergenceKind::E, np, sa.p_grid, sa.q_grid);
                const double err = max_abs(sa.dense() - K) / eps;
                const int    gap = int(sa.rank() - numerical_rank(K, eps, RankConvention::Absolute));
                worst_err        = std::max(worst_err, err);
                worst_gap        = std::max(worst_gap, gap);
                ok               = ok && err <= 10.0 && gap <= 3;
            }
    return {ok, fmt("12 cases: max error %.3f*eps (cap 10), max rank - svd rank = %d (cap 3)", worst_err, worst_gap)};
}

Outcome kl_product() {
    double worst_err = 0.0;
    bool   ok        = true;
    int    cases = 0, worst_raw = 0, worst_bound = 0;
    for (auto [l, k] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{3, 4}, std::pair{5, 17}})
        for (double n : {1.0, 32.0, 1024.0})
            for (double eps : {1e-4, 1e-6}) {
                const Block  b  = make_block(l, k);
                const auto   pg = uniform_grid(b.p_lo, b.p_hi, 64);
                const auto   qg = uniform_grid(b.q_lo, b.q_hi, 64);
                const auto   e  = build_constructive(b, DivergenceKind::E, n, eps / 2, pg, qg);
                const auto   r  = build_constructive(b, DivergenceKind::EReflected, n, eps / 2, pg, qg);
                const auto   sa = build_kl(b, n, eps, pg, qg);
                const Matrix K  = sample_kernel(DivergenceKind::KL, n, pg, qg);
                const double err = max_abs(sa.dense() - K) / eps;
                // T_eps: length of the longer of the two single-divergence expansions
                const int t     = int(std::max(e.rank(), r.rank()));
                const int raw   = int(sa.raw_terms);
                worst_err       = std::max(worst_err, err);
                if (raw - t * t >= worst_raw - worst_bound)
                    worst_raw = raw, worst_bound = t * t;
                ok = ok && err <= 10.0 && raw <= t * t;
                ++cases;
            }
    return {ok, fmt("%d cases: max error %.3f*eps (cap 10), tightest raw terms %d vs T^2 = %d", cases, worst_err,
                    worst_raw, worst_bound)};
}

Outcome hmatrix_end_to_end() {
    std::ostringstream detail;
    bool               ok = true;

    double small_err = 0.0;
    for (const auto &spec : {make_binomial(63), make_poisson(63, 60.0, 64), make_chi_squared(120.0, 64, 64)})
        for (auto builder : {Builder::ACA, Builder::Constructive})
            for (double eps : {1e-4, 1e-6, 1e-9}) {
                const auto   h   = compress(spec, eps, {builder, 8});
                const double err = max_abs(h.to_dense() - dense_matrix(spec)) / eps;
                small_err        = std::max(small_err, err);
                ok               = ok && err <= 10.0;
            }
    detail << fmt("dims<=64 max error %.3f*eps; ", small_err);

    std::mt19937_64                        rng(1024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const char *family : {"binomial", "poisson", "chisq"}) {
        const auto spec = desk_spec(family);
        const auto h    = compress(spec, 1e-6, {Builder::ACA});
        Vector     x(h.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) = u(rng);
        const Vector ref   = dense_matrix(spec) * x;
        const double rel   = (h.matvec(x) - ref).norm() / ref.norm();
        const double ratio = storage_report(h).ratio;
        ok                 = ok && rel <= 50e-6 && ratio <= 0.25;
        detail << fmt("%s n=1024 matvec rel %.2e storage %.4f; ", family, rel, ratio);
    }

    for (const char *family : {"binomial", "poisson", "chisq"}) {
        double       worst = 0.0;
        std::int64_t prev  = 0;
        for (int n : {256, 512, 1024, 2048}) {
            const FamilySpec spec = std::string_view(family) == "binomial" ? make_binomial(n)
                                    : std::string_view(family) == "poisson"
                                        ? make_poisson(n, double(n), n)
                                        : make_chi_squared(double(n), n, n);
            const auto h = compress(spec, 1e-6, {Builder::Constructive});
            if (prev > 0)
                worst = std::max(worst, double(h.stored_entries()) / double(prev));
            prev = h.stored_entries();
        }
        ok = ok && worst <= 2.6;
        detail << fmt("%s growth per doubling <= %.3f; ", family, worst);
    }
    return {ok, detail.str()};
}

Outcome tiling() {
    bool        ok    = true;
    std::size_t total = 0;
    for (int l = 1; l <= 8; ++l)
        for (auto dom : {DomainDescriptor::unit_square(l), DomainDescriptor::quarter_plane(1024.0, l)}) {
            const auto r = verify_tiling(build(dom), 100000);
            ok           = ok && r.covered == 1.0 && r.overlaps == 0;
            total += r.samples;
        }
    return {ok, fmt("16 schemes, %zu samples, all covered once", total)};
}

Outcome identities() {
    std::mt19937_64                        rng(12);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6), w(1e-3, 50.0);
    double                                 kl_gap = 0.0, dual_gap = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const double p = u(rng), q = u(rng);
        const double d = eval(DivergenceKind::KL, p, q);
        kl_gap = std::max(kl_gap, std::abs(d - eval(DivergenceKind::E, p, q) - eval(DivergenceKind::EReflected, p, q)) /
                                      std::max(1.0, d));
        const double a = w(rng), b = w(rng);
        dual_gap = std::max(dual_gap, std::abs(eval(DivergenceKind::EStar, a, b) - eval(DivergenceKind::E, b, a)));
    }

    double norm_gap = 0.0;
    for (int n : {16, 256, 1024}) {
        const auto spec = make_binomial(n);
        for (std::int64_t j = 0; j < cols(spec); ++j) {
            double s = 0.0;
            for (std::int64_t i = 0; i < rows(spec); ++i)
                s += entry_exact(spec, i, j);
            norm_gap = std::max(norm_gap, std::abs(s - 1.0));
        }
    }

    double     stirling = 0.0;
    const auto bs = make_binomial(1024);
    const auto km = kernel_map(bs);
    for (std::int64_t k = 1; k < 1024; ++k) {
        const double p = km.p_of_row(k);
        if (1024.0 * p * (1.0 - p) < 100.0)
            continue;
        for (std::int64_t j = 0; j < cols(bs); j += 7) {
            const double e = entry_exact(bs, k, j);
            if (e > 1e-250)
                stirling = std::max(stirling, std::abs(entry_stirling(bs, k, j) / e - 1.0));
        }
    }
    const auto ps = make_poisson(400, 400.0, 100);
    for (std::int64_t k = 100; k <= 400; ++k)
        for (std::int64_t j = 0; j < cols(ps); ++j)
            stirling = std::max(stirling, std::abs(entry_stirling(ps, k, j) / entry_exact(ps, k, j) - 1.0));
    const auto cs = make_chi_squared(400.0, 100, 400);
    for (std::int64_t i = 0; i < rows(cs); ++i)
        for (std::int64_t j = 99; j < cols(cs); ++j) {
            const double e = entry_exact(cs, i, j);
            if (e > 1e-250)
                stirling = std::max(stirling, std::abs(entry_stirling(cs, i, j) / e - 1.0));
        }

    const bool ok = kl_gap <= 1e-12 && dual_gap == 0.0 && norm_gap <= 1e-12 && stirling <= 0.01;
    return {ok, fmt("KL split %.2e, duality %.2e, column sums %.2e, Stirling rel %.2e", kl_gap, dual_gap, norm_gap,
                    stirling)};
}

} // namespace

int main() {
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
        {"ratio limits, lower regime", ratio_limits_lower},
        {"ratio limits, upper regime", ratio_limits_upper},
        {"uniform boundedness of the ratio", ratio_bounded},
        {"binomial rank map", [] { return rank_map("binomial"); }},
        {"poisson rank map", [] { return rank_map("poisson"); }},
        {"chi-squared rank map", [] { return rank_map("chisq"); }},
        {"rank linear in ln(1/eps)", eps_linearity},
        {"constructive builder soundness", constructive_soundness},
        {"KL product construction", kl_product},
        {"hierarchical matrix end to end", hmatrix_end_to_end},
        {"partition tiling", tiling},
        {"identity suite", identities},
    };
    int failed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", c + 1, criteria[c].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}

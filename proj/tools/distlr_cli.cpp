// distlr: rank maps, eps sweeps, ratio scans, compression and benchmarks for
// binomial / Poisson / chi-squared matrices.
//
// Exit status: 0 success, 1 I/O failure, 2 usage error, 3 numerical failure.

#include <distlr/distlr.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace distlr;
using json = nlohmann::ordered_json;

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string         family     = "binomial";
    int                 n          = 1024;
    int                 kmax       = 1024;
    double              lambda_max = 1024.0;
    double              xmax       = 1024.0;
    int                 grid       = 0; // 0: family default
    std::vector<double> eps;
    std::string         convention = "rel";
    std::string         builder    = "aca";
    std::string         out;
    std::string         in;
    std::uint64_t       seed    = 0x5eed;
    unsigned            threads = 0;
    int                 leaf    = 32;

    // ratio-scan
    double m_min  = 1e-8;
    double m_max  = 1e8;
    int    points = 33;

    // matvec-bench
    std::vector<int> sizes = {256, 512, 1024, 2048};
    int              repeats = 5;

    // verify-tiling / verify
    std::string domain   = "unit";
    double      extent   = 1024.0;
    std::vector<int> levels = {1, 2, 3, 4, 5, 6, 7, 8};
    std::size_t samples  = 100000;
};

unsigned worker_count(const Options &o) {
    return o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.threads;
}

FamilySpec family_spec(const Options &o, int size_override = 0) {
    if (o.family == "binomial") {
        const int n = size_override > 0 ? size_override : o.n;
        return make_binomial(n, size_override > 0 ? 0 : o.grid);
    }
    if (o.family == "poisson") {
        if (size_override > 0)
            return make_poisson(size_override, double(size_override), size_override);
        return make_poisson(o.kmax, o.lambda_max, o.grid > 0 ? o.grid : o.kmax);
    }
    if (size_override > 0)
        return make_chi_squared(double(size_override), size_override, size_override);
    return make_chi_squared(o.xmax, o.grid > 0 ? o.grid : int(std::lround(o.xmax)), o.kmax);
}

json family_json(const FamilySpec &spec) {
    json j;
    j["name"] = family_name(spec);
    if (auto *b = std::get_if<Binomial>(&spec)) {
        j["n"]       = b->n;
        j["columns"] = b->columns;
    } else if (auto *p = std::get_if<Poisson>(&spec)) {
        j["k_max"]       = p->k_max;
        j["lambda_max"]  = p->lambda_max;
        j["lambda_grid"] = p->lambda_grid;
    } else {
        const auto &c = std::get<ChiSquared>(spec);
        j["x_max"]  = c.x_max;
        j["x_grid"] = c.x_grid;
        j["k_max"]  = c.k_max;
    }
    j["rows"] = rows(spec);
    j["cols"] = cols(spec);
    return j;
}

RankConvention convention(const Options &o) {
    return o.convention == "abs" ? RankConvention::Absolute : RankConvention::RelativeToSigma1;
}

Builder builder(const Options &o) { return o.builder == "constructive" ? Builder::Constructive : Builder::ACA; }

double single_eps(const Options &o, double fallback) {
    if (o.eps.empty())
        return fallback;
    if (o.eps.size() > 1)
        throw usage_error("this command takes a single --eps value");
    return o.eps.front();
}

void check_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw usage_error("--eps must be positive");
}

std::string real(double x) {
    if (std::isnan(x))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

// CSV body goes to --out (or stdout); the provenance record to --out.json
// (or stderr).
class Output {
  public:
    explicit Output(const Options &o) : path_(o.out) {}

    std::ostringstream body;

    void finish(json provenance) {
        provenance["artifact_version"] = std::string(version);
        if (path_.empty()) {
            std::cout << body.str();
            std::cerr << provenance.dump(2) << "\n";
            return;
        }
        write(path_, body.str());
        provenance["output"] = path_;
        write(path_ + ".json", provenance.dump(2) + "\n");
    }

    static void write(const std::string &path, const std::string &text) {
        std::ofstream f(path, std::ios::binary);
        if (!f || !(f << text))
            throw io_error("cannot write " + path);
    }

  private:
    std::string path_;
};

json base_provenance(const std::string &command, const Options &o) {
    json j;
    j["command"] = command;
    j["seed"]    = o.seed;
    j["threads"] = worker_count(o);
    return j;
}

// ---------------------------------------------------------------------------

struct BlockRanks {
    Slot              slot;
    Vector            sigma;
    int               aca_rank = -1;
};

std::vector<BlockRanks> block_spectra(const FamilySpec &spec, const Options &o, double aca_eps) {
    const auto              layout = make_layout(spec, {o.leaf, std::nullopt});
    std::vector<BlockRanks> out(layout.offdiagonal.size());
    detail::parallel_for(out.size(), worker_count(o), [&](std::size_t t) {
        const Slot &s = layout.offdiagonal[t];
        out[t].slot   = s;
        out[t].sigma  = singular_values(dense_block(spec, s.rows, s.cols));
        if (aca_eps > 0.0) {
            auto sa = aca_build(
                [&](Eigen::Index i, Eigen::Index j) { return entry_exact(spec, s.rows.begin + i, s.cols.begin + j); },
                s.rows.size(), s.cols.size(), aca_eps);
            out[t].aca_rank = int(sa.rank());
        }
    });
    return out;
}

int run_rank_map(const Options &o) {
    const auto   spec = family_spec(o);
    const double eps  = single_eps(o, 1e-9);
    check_eps(eps);
    const auto blocks = block_spectra(spec, o, eps);

    Output out(o);
    out.body << "level,index,row_lo,row_hi,col_lo,col_hi,svd_rank,aca_rank\n";
    int max_svd = 0, max_aca = 0;
    for (const auto &b : blocks) {
        const int r = int(rank_from_singular_values(b.sigma, eps, convention(o)));
        max_svd     = std::max(max_svd, r);
        max_aca     = std::max(max_aca, b.aca_rank);
        out.body << b.slot.level << ',' << b.slot.index << ',' << b.slot.rows.begin << ',' << b.slot.rows.end << ','
                 << b.slot.cols.begin << ',' << b.slot.cols.end << ',' << r << ',' << b.aca_rank << '\n';
    }
    auto prov                 = base_provenance("rank-map", o);
    prov["family"]            = family_json(spec);
    prov["eps"]               = eps;
    prov["rank_convention"]   = o.convention;
    prov["leaf_size"]         = o.leaf;
    prov["blocks"]            = blocks.size();
    prov["max_svd_rank"]      = max_svd;
    prov["max_aca_rank"]      = max_aca;
    out.finish(prov);
    return 0;
}

int run_eps_sweep(const Options &o) {
    const auto spec = family_spec(o);
    auto       eps  = o.eps;
    if (eps.empty())
        for (int t = 3; t <= 12; ++t)
            eps.push_back(std::pow(10.0, -t));
    for (double e : eps)
        check_eps(e);
    std::sort(eps.begin(), eps.end());
    const auto blocks = block_spectra(spec, o, 0.0);

    Output out(o);
    out.body << "eps,max_rank\n";
    for (double e : eps) {
        int r = 0;
        for (const auto &b : blocks)
            r = std::max(r, int(rank_from_singular_values(b.sigma, e, convention(o))));
        out.body << real(e) << ',' << r << '\n';
    }
    auto prov               = base_provenance("eps-sweep", o);
    prov["family"]          = family_json(spec);
    prov["eps"]             = eps;
    prov["rank_convention"] = o.convention;
    prov["leaf_size"]       = o.leaf;
    prov["blocks"]          = blocks.size();
    out.finish(prov);
    return 0;
}

int run_ratio_scan(const Options &o) {
    if (!(o.m_min > 0.0 && o.m_max >= o.m_min) || o.points < 1)
        throw usage_error("ratio-scan needs 0 < --m-min <= --m-max and --points >= 1");
    Output out(o);
    out.body << "regime,M,p_M,q_M,ratio\n";
    int failures = 0;
    for (auto regime : {Regime::Lower, Regime::Upper})
        for (int i = 0; i < o.points; ++i) {
            const double lo = std::log10(o.m_min), hi = std::log10(o.m_max);
            const double m  = o.points == 1 ? o.m_min : std::pow(10.0, lo + (hi - lo) * i / (o.points - 1));
            out.body << to_string(regime) << ',' << real(m) << ',';
            try {
                const auto t = solve_thresholds(regime, m);
                out.body << real(t.p_m) << ',' << real(t.q_m) << ',' << real(corner_divergence(t) / m) << '\n';
            } catch (const solver_error &e) {
                ++failures;
                std::cerr << "ratio-scan: " << to_string(regime) << " M=" << m << ": " << e.what() << "\n";
                out.body << "nan,nan,nan\n";
            }
        }
    auto prov             = base_provenance("ratio-scan", o);
    prov["m_min"]         = o.m_min;
    prov["m_max"]         = o.m_max;
    prov["points"]        = o.points;
    prov["solver_failures"] = failures;
    out.finish(prov);
    return 0;
}

int run_compress(const Options &o) {
    if (o.out.empty())
        throw usage_error("compress needs --out PATH for the HLRD1 container");
    const auto   spec = family_spec(o);
    const double eps  = single_eps(o, 1e-6);
    check_eps(eps);

    const auto t0 = std::chrono::steady_clock::now();
    const auto h  = compress(spec, eps, {builder(o), o.leaf, std::nullopt, worker_count(o)});
    const double build_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        save(h, o.out);
    } catch (const error &e) {
        throw io_error(e.what());
    }
    const auto rep = storage_report(h);
    const auto ver = verify(h, o.samples, o.seed);

    auto prov              = base_provenance("compress", o);
    prov["family"]         = family_json(spec);
    prov["eps"]            = eps;
    prov["builder"]        = o.builder;
    prov["leaf_size"]      = o.leaf;
    prov["output"]         = o.out;
    prov["build_seconds"]  = build_s;
    prov["stored_entries"] = rep.stored_entries;
    prov["dense_entries"]  = rep.dense_equivalent;
    prov["storage_ratio"]  = rep.ratio;
    json levels            = json::array();
    for (auto [level, r] : rep.per_level_ranks)
        levels.push_back({{"level", level}, {"max_rank", r}});
    prov["per_level_ranks"]   = levels;
    prov["verify_samples"]    = ver.samples;
    prov["verify_max_abs"]    = ver.max_abs_error;
    prov["verify_rms"]        = ver.rms_error;
    prov["artifact_version"]  = std::string(version);
    Output::write(o.out + ".json", prov.dump(2) + "\n");
    std::cout << prov.dump(2) << "\n";
    return 0;
}

int run_verify(const Options &o) {
    if (o.in.empty())
        throw usage_error("verify needs --in PATH");
    HMatrix h = [&] {
        try {
            return load(o.in);
        } catch (const format_error &) {
            throw;
        } catch (const error &e) {
            throw io_error(e.what());
        }
    }();
    const auto rep = storage_report(h);
    const auto ver = verify(h, o.samples, o.seed);
    json       j;
    j["command"]           = "verify";
    j["input"]             = o.in;
    j["family"]            = family_json(h.spec());
    j["eps"]               = h.eps();
    j["builder"]           = h.builder() == Builder::ACA ? "aca" : "constructive";
    j["seed"]              = o.seed;
    j["stored_entries"]    = rep.stored_entries;
    j["storage_ratio"]     = rep.ratio;
    j["verify_samples"]    = ver.samples;
    j["verify_max_abs"]    = ver.max_abs_error;
    j["verify_rms"]        = ver.rms_error;
    j["artifact_version"]  = std::string(version);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_matvec_bench(const Options &o) {
    const double eps = single_eps(o, 1e-6);
    check_eps(eps);
    if (o.sizes.empty() || o.repeats < 1)
        throw usage_error("matvec-bench needs --sizes and --repeats >= 1");
    using clock = std::chrono::steady_clock;
    auto secs   = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };

    Output out(o);
    out.body << "n,rows,cols,build_seconds,matvec_seconds,dense_matvec_seconds,rel_error,stored_entries,storage_ratio\n";
    std::mt19937_64                        rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n : o.sizes) {
        if (n < 4)
            throw usage_error("--sizes entries must be >= 4");
        const auto spec = family_spec(o, n);
        auto       t0   = clock::now();
        const auto h    = compress(spec, eps, {builder(o), o.leaf, std::nullopt, worker_count(o)});
        const double build_s = secs(t0);
        const Matrix A = dense_matrix(spec);
        Vector       x(h.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) = u(rng);

        Vector y, ref;
        t0 = clock::now();
        for (int r = 0; r < o.repeats; ++r)
            y = h.matvec(x);
        const double mv_s = secs(t0) / o.repeats;
        t0                = clock::now();
        for (int r = 0; r < o.repeats; ++r)
            ref = A * x;
        const double dense_s = secs(t0) / o.repeats;

        const double rel = (y - ref).norm() / ref.norm();
        out.body << n << ',' << h.rows() << ',' << h.cols() << ',' << real(build_s) << ',' << real(mv_s) << ','
                 << real(dense_s) << ',' << real(rel) << ',' << h.stored_entries() << ','
                 << real(storage_report(h).ratio) << '\n';
    }
    auto prov         = base_provenance("matvec-bench", o);
    prov["family"]    = o.family;
    prov["eps"]       = eps;
    prov["builder"]   = o.builder;
    prov["sizes"]     = o.sizes;
    prov["repeats"]   = o.repeats;
    prov["leaf_size"] = o.leaf;
    out.finish(prov);
    return 0;
}

int run_verify_tiling(const Options &o) {
    if (o.domain != "unit" && o.domain != "quarter")
        throw usage_error("--domain must be unit or quarter");
    Output out(o);
    out.body << "domain,extent,finest_level,samples,covered,overlaps\n";
    bool ok = true;
    for (int l : o.levels) {
        const auto dom = o.domain == "unit" ? DomainDescriptor::unit_square(l) : DomainDescriptor::quarter_plane(o.extent, l);
        const auto r   = verify_tiling(build(dom), o.samples, o.seed);
        ok             = ok && r.covered == 1.0 && r.overlaps == 0;
        out.body << o.domain << ',' << real(dom.kind == DomainKind::UnitSquare ? 1.0 : o.extent) << ',' << l << ','
                 << r.samples << ',' << real(r.covered) << ',' << r.overlaps << '\n';
    }
    auto prov         = base_provenance("verify-tiling", o);
    prov["domain"]    = o.domain;
    prov["extent"]    = o.extent;
    prov["levels"]    = o.levels;
    prov["samples"]   = o.samples;
    prov["exact_tiling"] = ok;
    out.finish(prov);
    return ok ? 0 : 3;
}

void add_family_flags(CLI::App *cmd, Options &o) {
    cmd->add_option("--family", o.family, "Distribution family")
        ->check(CLI::IsMember({"binomial", "poisson", "chisq"}))
        ->capture_default_str();
    cmd->add_option("--n", o.n, "Binomial trial count")->check(CLI::Range(1, 1 << 20))->capture_default_str();
    cmd->add_option("--kmax", o.kmax, "Poisson k_max / chi-squared k_max")->check(CLI::Range(1, 1 << 20))->capture_default_str();
    cmd->add_option("--lambda-max", o.lambda_max, "Poisson lambda_max")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--xmax", o.xmax, "Chi-squared x_max")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--grid", o.grid, "Column grid (binomial, poisson) or x grid (chisq); 0 = default")
        ->check(CLI::Range(0, 1 << 20));
    cmd->add_option("--leaf", o.leaf, "Grid points per finest diagonal cell")->check(CLI::Range(1, 1 << 20))->capture_default_str();
}

void add_common_flags(CLI::App *cmd, Options &o) {
    cmd->add_option("--out", o.out, "Output path (CSV); provenance goes to PATH.json");
    cmd->add_option("--seed", o.seed, "Seed for sampled checks")->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads, 0 = available cores")->capture_default_str();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Hierarchical low-rank tools for binomial, Poisson and chi-squared matrices"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    Options o;

    auto *rank_map = app.add_subcommand("rank-map", "Per-block numerical rank (SVD oracle and ACA)");
    add_family_flags(rank_map, o);
    add_common_flags(rank_map, o);
    rank_map->add_option("--eps", o.eps, "Accuracy (single value, default 1e-9)");
    rank_map->add_option("--rank-convention", o.convention, "rel: sigma > eps*sigma_1, abs: sigma > eps")
        ->check(CLI::IsMember({"rel", "abs"}))
        ->capture_default_str();

    auto *sweep = app.add_subcommand("eps-sweep", "Maximum block rank as a function of eps");
    add_family_flags(sweep, o);
    add_common_flags(sweep, o);
    sweep->add_option("--eps", o.eps, "Accuracies (repeatable, default 1e-3..1e-12)");
    sweep->add_option("--rank-convention", o.convention, "rel or abs")
        ->check(CLI::IsMember({"rel", "abs"}))
        ->capture_default_str();

    auto *scan = app.add_subcommand("ratio-scan", "E(p_M||q_M)/M over a log grid of M for both regimes");
    add_common_flags(scan, o);
    scan->add_option("--m-min", o.m_min, "Smallest M")->capture_default_str();
    scan->add_option("--m-max", o.m_max, "Largest M")->capture_default_str();
    scan->add_option("--points", o.points, "Grid points per regime")->capture_default_str();

    auto *comp = app.add_subcommand("compress", "Build the hierarchical matrix and write an HLRD1 file");
    add_family_flags(comp, o);
    add_common_flags(comp, o);
    comp->add_option("--eps", o.eps, "Accuracy (default 1e-6)");
    comp->add_option("--builder", o.builder, "Block builder")
        ->check(CLI::IsMember({"aca", "constructive"}))
        ->capture_default_str();
    comp->add_option("--samples", o.samples, "Sampled entries for the accuracy check")->capture_default_str();

    auto *ver = app.add_subcommand("verify", "Reload an HLRD1 file and check it against exact entries");
    ver->add_option("--in", o.in, "HLRD1 file")->required();
    ver->add_option("--samples", o.samples, "Sampled entries")->capture_default_str();
    ver->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();

    auto *bench = app.add_subcommand("matvec-bench", "Compressed vs dense matvec time and error");
    bench->add_option("--family", o.family, "Distribution family")
        ->check(CLI::IsMember({"binomial", "poisson", "chisq"}))
        ->capture_default_str();
    bench->add_option("--leaf", o.leaf, "Grid points per finest diagonal cell")->capture_default_str();
    add_common_flags(bench, o);
    bench->add_option("--eps", o.eps, "Accuracy (default 1e-6)");
    bench->add_option("--builder", o.builder, "Block builder")
        ->check(CLI::IsMember({"aca", "constructive"}))
        ->capture_default_str();
    bench->add_option("--sizes", o.sizes, "Matrix sizes n")->capture_default_str();
    bench->add_option("--repeats", o.repeats, "Timed repetitions per size")->capture_default_str();

    auto *tiling = app.add_subcommand("verify-tiling", "Monte Carlo check that the partition tiles its domain");
    add_common_flags(tiling, o);
    tiling->add_option("--domain", o.domain, "unit or quarter")->capture_default_str();
    tiling->add_option("--extent", o.extent, "Quarter-plane extent (power of two)")->capture_default_str();
    tiling->add_option("--levels", o.levels, "Finest levels to check")->capture_default_str();
    tiling->add_option("--samples", o.samples, "Samples per scheme")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*rank_map)
            return run_rank_map(o);
        if (*sweep)
            return run_eps_sweep(o);
        if (*scan)
            return run_ratio_scan(o);
        if (*comp)
            return run_compress(o);
        if (*ver)
            return run_verify(o);
        if (*bench)
            return run_matvec_bench(o);
        if (*tiling)
            return run_verify_tiling(o);
    } catch (const usage_error &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const domain_error &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const io_error &e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 1;
    } catch (const format_error &e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

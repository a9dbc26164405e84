#pragma once
//
// Hierarchical low-rank representation of a family matrix.
//
// The dyadic partition lives in kernel coordinates (p, q); each row i and
// column j is assigned to the half-open interval containing p_i (resp. q_j),
// so every index pair belongs to exactly one stored block:
//   - one low-rank block per partition block with non-empty index ranges,
//   - one dense block per finest-level diagonal cell,
//   - dense strips for the rows/columns where the kernel form is singular.
//

#include <distlr/errors.hpp>
#include <distlr/families.hpp>
#include <distlr/lowrank.hpp>
#include <distlr/partition.hpp>
#include <distlr/separated.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace distlr {

struct IndexRange {
    std::int64_t begin = 0;
    std::int64_t end   = 0;

    std::int64_t size() const { return end - begin; }
    bool         empty() const { return end <= begin; }
    bool         contains(std::int64_t i) const { return i >= begin && i < end; }

    friend bool operator==(const IndexRange &, const IndexRange &) = default;
};

enum class SlotKind : std::uint8_t { OffDiagonal = 0, DiagonalCell = 1, SingularRows = 2, SingularCols = 3 };

// Position of one stored block in the matrix.
struct Slot {
    SlotKind     kind  = SlotKind::OffDiagonal;
    int          level = 0; // partition level (off-diagonal blocks)
    std::int64_t index = 0; // block index, cell index, or strip ordinal
    IndexRange   rows;
    IndexRange   cols;
};

struct LayoutOptions {
    int                leaf_size = 32;
    std::optional<int> finest_level;
};

struct BlockLayout {
    PartitionScheme   scheme;
    std::vector<Slot> offdiagonal; // in (level, index) order
    std::vector<Slot> dense;       // diagonal cells, then singular strips
};

namespace detail {

// first index in [lo, hi) whose coordinate is >= x
template <typename Coord>
std::int64_t lower_index(Coord &&coord, std::int64_t lo, std::int64_t hi, double x) {
    while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (coord(mid) < x)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

// indices of [lo, hi) whose coordinate lies in [a, b), or [a, b] when b is
// the end of the domain
template <typename Coord>
IndexRange interval_indices(Coord &&coord, std::int64_t lo, std::int64_t hi, double a, double b, double extent) {
    IndexRange r;
    r.begin = lower_index(coord, lo, hi, a);
    r.end   = b >= extent ? hi : lower_index(coord, lo, hi, b);
    if (r.end < r.begin)
        r.end = r.begin;
    return r;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn &&fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t t = 0; t < count; ++t)
            fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr       failure;
    std::mutex               failure_mutex;
    std::vector<std::thread> pool;
    const unsigned           workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < count; t = next++) {
                try {
                    fn(t);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto &th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace detail

// Finest level whose diagonal cells hold about leaf_size grid points.
inline int default_finest_level(const FamilySpec &spec, int leaf_size) {
    const auto   km      = kernel_map(spec);
    const auto   m       = rows(spec);
    const auto   n       = cols(spec);
    const double pspan   = km.p_of_row(m - 1) - km.p_of_row(0);
    const double qspan   = km.q_of_col(n - 1) - km.q_of_col(0);
    const double spacing = std::max(m > 1 ? pspan / double(m - 1) : 0.0, n > 1 ? qspan / double(n - 1) : 0.0);
    const auto   domain  = partition_domain(spec, 1);
    const int    coarse  = 1 - extent_exponent(domain.extent);
    if (!(spacing > 0.0))
        return coarse;
    const int level = static_cast<int>(std::floor(-std::log2(std::max(1, leaf_size) * spacing)));
    return std::max(level, coarse);
}

inline BlockLayout make_layout(const FamilySpec &spec, const LayoutOptions &options = {}) {
    const auto   km     = kernel_map(spec);
    const int    finest = options.finest_level.value_or(default_finest_level(spec, options.leaf_size));
    BlockLayout  layout{build(partition_domain(spec, finest)), {}, {}};
    const double extent = layout.scheme.extent();
    const auto   m      = rows(spec);
    const auto   n      = cols(spec);

    // regular (non-singular) index ranges; singular rows/cols sit at the ends
    IndexRange reg_rows{0, m}, reg_cols{0, n};
    while (reg_rows.begin < reg_rows.end && km.singular_row(reg_rows.begin))
        ++reg_rows.begin;
    while (reg_rows.end > reg_rows.begin && km.singular_row(reg_rows.end - 1))
        --reg_rows.end;
    while (reg_cols.begin < reg_cols.end && km.singular_col(reg_cols.begin))
        ++reg_cols.begin;
    while (reg_cols.end > reg_cols.begin && km.singular_col(reg_cols.end - 1))
        --reg_cols.end;

    auto pcoord = [&](std::int64_t i) { return km.p_of_row(i); };
    auto qcoord = [&](std::int64_t j) { return km.q_of_col(j); };

    for (const Block &b : layout.scheme.blocks()) {
        Slot s;
        s.kind  = SlotKind::OffDiagonal;
        s.level = b.level;
        s.index = b.index;
        s.rows  = detail::interval_indices(pcoord, reg_rows.begin, reg_rows.end, b.p_lo, b.p_hi, extent);
        s.cols  = detail::interval_indices(qcoord, reg_cols.begin, reg_cols.end, b.q_lo, b.q_hi, extent);
        if (!s.rows.empty() && !s.cols.empty())
            layout.offdiagonal.push_back(s);
    }
    for (const DenseCell &c : layout.scheme.dense_remainder()) {
        Slot s;
        s.kind  = SlotKind::DiagonalCell;
        s.level = layout.scheme.finest_level();
        s.index = c.index;
        s.rows  = detail::interval_indices(pcoord, reg_rows.begin, reg_rows.end, c.lo, c.hi, extent);
        s.cols  = detail::interval_indices(qcoord, reg_cols.begin, reg_cols.end, c.lo, c.hi, extent);
        if (!s.rows.empty() && !s.cols.empty())
            layout.dense.push_back(s);
    }
    std::int64_t strip = 0;
    if (reg_rows.begin > 0)
        layout.dense.push_back({SlotKind::SingularRows, 0, strip++, {0, reg_rows.begin}, {0, n}});
    if (reg_rows.end < m)
        layout.dense.push_back({SlotKind::SingularRows, 0, strip++, {reg_rows.end, m}, {0, n}});
    if (reg_cols.begin > 0)
        layout.dense.push_back({SlotKind::SingularCols, 0, strip++, reg_rows, {0, reg_cols.begin}});
    if (reg_cols.end < n)
        layout.dense.push_back({SlotKind::SingularCols, 0, strip++, reg_rows, {reg_cols.end, n}});
    return layout;
}

inline Matrix dense_block(const FamilySpec &spec, const IndexRange &r, const IndexRange &c) {
    Matrix D(r.size(), c.size());
    for (std::int64_t j = 0; j < c.size(); ++j)
        for (std::int64_t i = 0; i < r.size(); ++i)
            D(i, j) = entry_exact(spec, r.begin + i, c.begin + j);
    return D;
}

inline Matrix dense_matrix(const FamilySpec &spec) { return dense_block(spec, {0, rows(spec)}, {0, cols(spec)}); }

enum class Builder : std::uint8_t { Constructive = 0, ACA = 1 };

struct LowRankBlock {
    Slot   slot;
    Matrix U; // rows x r
    Matrix V; // cols x r

    Eigen::Index rank() const { return U.cols(); }
};

struct DenseBlock {
    Slot   slot;
    Matrix data;
};

class HMatrix {
  public:
    HMatrix(FamilySpec spec, PartitionScheme scheme, double eps, Builder builder, std::vector<LowRankBlock> lowrank,
            std::vector<DenseBlock> dense)
        : spec_(std::move(spec)), scheme_(std::move(scheme)), eps_(eps), builder_(builder), lowrank_(std::move(lowrank)),
          dense_(std::move(dense)) {
        index_rows();
    }

    const FamilySpec      &spec() const { return spec_; }
    const PartitionScheme &scheme() const { return scheme_; }
    double                 eps() const { return eps_; }
    Builder                builder() const { return builder_; }
    std::int64_t           rows() const { return distlr::rows(spec_); }
    std::int64_t           cols() const { return distlr::cols(spec_); }

    const std::vector<LowRankBlock> &lowrank_blocks() const { return lowrank_; }
    const std::vector<DenseBlock>   &dense_blocks() const { return dense_; }

    std::int64_t stored_entries() const {
        std::int64_t s = 0;
        for (const auto &b : lowrank_)
            s += b.rank() * (b.slot.rows.size() + b.slot.cols.size());
        for (const auto &b : dense_)
            s += b.slot.rows.size() * b.slot.cols.size();
        return s;
    }

    // Reconstructed entry (i, j).
    double entry(std::int64_t i, std::int64_t j) const {
        if (i < 0 || i >= rows() || j < 0 || j >= cols())
            throw domain_error("HMatrix::entry: index out of range");
        for (const auto &ref : row_index_[static_cast<std::size_t>(i)]) {
            if (j < ref.cols.begin || j >= ref.cols.end)
                continue;
            if (ref.lowrank) {
                const auto &b = lowrank_[ref.id];
                return b.U.row(i - b.slot.rows.begin).dot(b.V.row(j - b.slot.cols.begin));
            }
            const auto &b = dense_[ref.id];
            return b.data(i - b.slot.rows.begin, j - b.slot.cols.begin);
        }
        throw domain_error("HMatrix::entry: index pair not owned by any block");
    }

    Vector matvec(const Vector &x) const {
        if (x.size() != cols())
            throw domain_error("matvec: vector length " + std::to_string(x.size()) + " does not match " +
                               std::to_string(cols()) + " columns");
        Vector y = Vector::Zero(rows());
        for (const auto &b : lowrank_) {
            if (b.rank() == 0)
                continue;
            const Vector t = b.V.transpose() * x.segment(b.slot.cols.begin, b.slot.cols.size());
            y.segment(b.slot.rows.begin, b.slot.rows.size()) += b.U * t;
        }
        for (const auto &b : dense_)
            y.segment(b.slot.rows.begin, b.slot.rows.size()) += b.data * x.segment(b.slot.cols.begin, b.slot.cols.size());
        return y;
    }

    Matrix to_dense() const {
        Matrix A = Matrix::Zero(rows(), cols());
        for (const auto &b : lowrank_)
            A.block(b.slot.rows.begin, b.slot.cols.begin, b.slot.rows.size(), b.slot.cols.size()) = b.U * b.V.transpose();
        for (const auto &b : dense_)
            A.block(b.slot.rows.begin, b.slot.cols.begin, b.slot.rows.size(), b.slot.cols.size()) = b.data;
        return A;
    }

  private:
    struct RowRef {
        IndexRange  cols;
        bool        lowrank = false;
        std::size_t id      = 0;
    };

    void index_rows() {
        row_index_.assign(static_cast<std::size_t>(rows()), {});
        auto add = [&](const Slot &s, bool lowrank, std::size_t id) {
            if (s.rows.begin < 0 || s.rows.end > rows() || s.cols.begin < 0 || s.cols.end > cols())
                throw domain_error("HMatrix: block index range outside the matrix");
            for (std::int64_t i = s.rows.begin; i < s.rows.end; ++i)
                row_index_[static_cast<std::size_t>(i)].push_back({s.cols, lowrank, id});
        };
        for (std::size_t t = 0; t < lowrank_.size(); ++t)
            add(lowrank_[t].slot, true, t);
        for (std::size_t t = 0; t < dense_.size(); ++t)
            add(dense_[t].slot, false, t);
    }

    FamilySpec                       spec_;
    PartitionScheme                  scheme_;
    double                           eps_;
    Builder                          builder_;
    std::vector<LowRankBlock>        lowrank_;
    std::vector<DenseBlock>          dense_;
    std::vector<std::vector<RowRef>> row_index_;
};

struct CompressOptions {
    Builder            builder   = Builder::ACA;
    int                leaf_size = 32;
    std::optional<int> finest_level;
    unsigned           threads = 1;
};

// Low-rank factors of one off-diagonal block at accuracy eps, using exact
// entries. The constructive route approximates the kernel and carries the
// exact row/column factors in alpha/beta.
inline LowRank compress_block(const FamilySpec &spec, const PartitionScheme &scheme, const Slot &slot, double eps,
                              Builder builder) {
    if (builder == Builder::ACA) {
        auto oracle = [&](Eigen::Index a, Eigen::Index b) {
            return entry_exact(spec, slot.rows.begin + a, slot.cols.begin + b);
        };
        auto sa = aca_build(oracle, slot.rows.size(), slot.cols.size(), eps);
        return {std::move(sa.alpha), std::move(sa.beta)};
    }

    const auto          km    = kernel_map(spec);
    const auto          level = scheme.level_blocks(slot.level);
    const Block        &block = level[static_cast<std::size_t>(slot.index)];
    std::vector<double> pg(static_cast<std::size_t>(slot.rows.size())), qg(static_cast<std::size_t>(slot.cols.size()));
    for (std::int64_t a = 0; a < slot.rows.size(); ++a)
        pg[static_cast<std::size_t>(a)] = km.p_of_row(slot.rows.begin + a);
    for (std::int64_t b = 0; b < slot.cols.size(); ++b)
        qg[static_cast<std::size_t>(b)] = km.q_of_col(slot.cols.begin + b);

    SeparatedApprox sa = km.kind == DivergenceKind::KL ? build_kl(block, km.n_eff, eps, pg, qg)
                                                       : build_constructive(block, km.kind, km.n_eff, eps, pg, qg);
    for (std::int64_t a = 0; a < slot.rows.size(); ++a)
        sa.alpha.row(a) *= km.row_factor(slot.rows.begin + a);
    for (std::int64_t b = 0; b < slot.cols.size(); ++b)
        sa.beta.row(b) *= km.col_factor(slot.cols.begin + b);
    return recompress(sa.alpha, sa.beta, eps, Truncation::RelativeToSigma1);
}

// Build the hierarchical representation. eps >= 1 stores every block densely.
inline HMatrix compress(const FamilySpec &spec, double eps, const CompressOptions &options = {}) {
    if (rows(spec) < 4 || cols(spec) < 4)
        throw domain_error("compress: matrix dimensions must be at least 4");
    if (!(eps > 0.0))
        throw domain_error("compress: eps must be positive");

    auto layout = make_layout(spec, {options.leaf_size, options.finest_level});

    std::vector<DenseBlock> dense;
    dense.reserve(layout.dense.size());
    for (const Slot &s : layout.dense)
        dense.push_back({s, dense_block(spec, s.rows, s.cols)});

    std::vector<LowRankBlock> lowrank;
    if (eps >= 1.0) {
        for (const Slot &s : layout.offdiagonal)
            dense.push_back({s, dense_block(spec, s.rows, s.cols)});
    } else {
        lowrank.resize(layout.offdiagonal.size());
        const unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
        detail::parallel_for(layout.offdiagonal.size(), threads, [&](std::size_t t) {
            const Slot &s = layout.offdiagonal[t];
            try {
                auto lr    = compress_block(spec, layout.scheme, s, eps, options.builder);
                lowrank[t] = {s, std::move(lr.U), std::move(lr.V)};
            } catch (const std::exception &e) {
                throw builder_error("block (level " + std::to_string(s.level) + ", index " + std::to_string(s.index) +
                                    "): " + e.what());
            }
        });
    }
    return HMatrix(spec, std::move(layout.scheme), eps, options.builder, std::move(lowrank), std::move(dense));
}

struct StorageReport {
    std::int64_t                     stored_entries   = 0;
    std::int64_t                     dense_equivalent = 0;
    double                           ratio            = 0.0;
    std::vector<std::pair<int, int>> per_level_ranks; // (level, max rank)
};

inline StorageReport storage_report(const HMatrix &h) {
    StorageReport r;
    r.stored_entries   = h.stored_entries();
    r.dense_equivalent = h.rows() * h.cols();
    r.ratio            = double(r.stored_entries) / double(r.dense_equivalent);
    std::map<int, int> levels;
    for (const auto &b : h.lowrank_blocks()) {
        auto &v = levels[b.slot.level];
        v       = std::max(v, static_cast<int>(b.rank()));
    }
    r.per_level_ranks.assign(levels.begin(), levels.end());
    return r;
}

struct VerifyReport {
    std::size_t samples       = 0;
    double      max_abs_error = 0.0;
    double      rms_error     = 0.0;
};

// Reconstruction against entry_exact at uniformly drawn index pairs.
inline VerifyReport verify(const HMatrix &h, std::size_t samples, std::uint64_t seed = 0x5eed) {
    VerifyReport r;
    r.samples = samples;
    if (samples == 0)
        return r;
    std::mt19937_64                             rng(seed);
    std::uniform_int_distribution<std::int64_t> ri(0, h.rows() - 1), ci(0, h.cols() - 1);
    double                                      sum2 = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const auto   i = ri(rng);
        const auto   j = ci(rng);
        const double e = std::abs(h.entry(i, j) - entry_exact(h.spec(), i, j));
        r.max_abs_error = std::max(r.max_abs_error, e);
        sum2 += e * e;
    }
    r.rms_error = std::sqrt(sum2 / double(samples));
    return r;
}

} // namespace distlr

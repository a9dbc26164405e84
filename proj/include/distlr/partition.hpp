#pragma once
//
// Dyadic staircase partition of the off-diagonal region.
//
// Block (l, k) has side h = 2^-l and
//   k even:  [k h, (k+1) h] x [(k+1) h, (k+2) h]   (above the diagonal, p < q)
//   k odd:   [k h, (k+1) h] x [(k-1) h, k h]       (below the diagonal, p > q)
// Each block touches the diagonal p = q at exactly one corner.
//
// The quarter-plane partition is truncated to [0, A]^2 with A = 2^a, so its
// coarsest level is 1 - a. The unit square is the case A = 1. Below the
// finest level the diagonal is covered by dense cells [j h, (j+1) h]^2.
//

#include <distlr/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace distlr {

enum class Parity { Even, Odd };

struct Block {
    int          level  = 0;
    std::int64_t index  = 0;
    Parity       parity = Parity::Even;
    double       p_lo = 0.0, p_hi = 0.0;
    double       q_lo = 0.0, q_hi = 0.0;

    double side() const { return p_hi - p_lo; }

    // coordinate c of the corner (c, c) shared with the diagonal
    double corner() const { return parity == Parity::Odd ? p_lo : p_hi; }

    bool contains(double p, double q) const { return p >= p_lo && p <= p_hi && q >= q_lo && q <= q_hi; }

    friend bool operator==(const Block &a, const Block &b) { return a.level == b.level && a.index == b.index; }
};

inline Block make_block(int level, std::int64_t index) {
    if (index < 0)
        throw domain_error("block index must be non-negative");
    const double h = std::ldexp(1.0, -level);
    Block        b;
    b.level  = level;
    b.index  = index;
    b.parity = (index % 2 == 0) ? Parity::Even : Parity::Odd;
    b.p_lo   = static_cast<double>(index) * h;
    b.p_hi   = static_cast<double>(index + 1) * h;
    if (b.parity == Parity::Even) {
        b.q_lo = static_cast<double>(index + 1) * h;
        b.q_hi = static_cast<double>(index + 2) * h;
    } else {
        b.q_lo = static_cast<double>(index - 1) * h;
        b.q_hi = static_cast<double>(index) * h;
    }
    return b;
}

// Finest-level diagonal square [lo, hi]^2 stored densely.
struct DenseCell {
    std::int64_t index = 0;
    double       lo = 0.0, hi = 0.0;

    bool contains(double p, double q) const { return p >= lo && p <= hi && q >= lo && q <= hi; }

    friend bool operator==(const DenseCell &a, const DenseCell &b) { return a.index == b.index; }
};

enum class DomainKind { QuarterPlane, UnitSquare };

struct DomainDescriptor {
    DomainKind kind         = DomainKind::UnitSquare;
    double     extent       = 1.0; // A, a power of two; 1 for the unit square
    int        finest_level = 1;

    static DomainDescriptor unit_square(int finest_level) { return {DomainKind::UnitSquare, 1.0, finest_level}; }
    static DomainDescriptor quarter_plane(double extent, int finest_level) {
        return {DomainKind::QuarterPlane, extent, finest_level};
    }
};

class PartitionScheme {
  public:
    const DomainDescriptor &domain() const { return domain_; }
    double                  extent() const { return domain_.extent; }
    int                     coarsest_level() const { return coarsest_; }
    int                     finest_level() const { return domain_.finest_level; }

    // Blocks sorted by (level, index).
    std::span<const Block>     blocks() const { return blocks_; }
    std::span<const DenseCell> dense_remainder() const { return dense_; }

    std::span<const Block> level_blocks(int level) const {
        if (level < coarsest_ || level > finest_level())
            return {};
        const auto l = static_cast<std::size_t>(level - coarsest_);
        return std::span<const Block>(blocks_).subspan(level_offset_[l], level_offset_[l + 1] - level_offset_[l]);
    }

  private:
    friend PartitionScheme build(const DomainDescriptor &);

    DomainDescriptor         domain_;
    int                      coarsest_ = 1;
    std::vector<Block>       blocks_;
    std::vector<std::size_t> level_offset_;
    std::vector<DenseCell>   dense_;
};

// log2(A) for an exact power of two A >= 1.
inline int extent_exponent(double extent) {
    if (!(extent >= 1.0) || !std::isfinite(extent))
        throw domain_error("extent must be a power of two >= 1, got " + std::to_string(extent));
    int          e = 0;
    const double m = std::frexp(extent, &e);
    if (m != 0.5)
        throw domain_error("extent must be a power of two, got " + std::to_string(extent));
    return e - 1;
}

inline PartitionScheme build(const DomainDescriptor &domain) {
    PartitionScheme s;
    s.domain_ = domain;
    if (domain.kind == DomainKind::UnitSquare) {
        s.domain_.extent = 1.0;
        if (domain.finest_level < 1)
            throw domain_error("unit-square partition needs finest level >= 1");
    }
    const int a = extent_exponent(s.domain_.extent);
    s.coarsest_ = 1 - a;
    if (domain.finest_level < s.coarsest_)
        throw domain_error("finest level " + std::to_string(domain.finest_level) + " is coarser than the first level " +
                           std::to_string(s.coarsest_));
    if (domain.finest_level - s.coarsest_ > 40)
        throw domain_error("too many partition levels");

    s.level_offset_.push_back(0);
    for (int level = s.coarsest_; level <= domain.finest_level; ++level) {
        const auto count = static_cast<std::int64_t>(std::ldexp(s.domain_.extent, level));
        for (std::int64_t k = 0; k < count; ++k)
            s.blocks_.push_back(make_block(level, k));
        s.level_offset_.push_back(s.blocks_.size());
    }
    const double h     = std::ldexp(1.0, -domain.finest_level);
    const auto   cells = static_cast<std::int64_t>(std::ldexp(s.domain_.extent, domain.finest_level));
    s.dense_.reserve(static_cast<std::size_t>(cells));
    for (std::int64_t j = 0; j < cells; ++j)
        s.dense_.push_back({j, static_cast<double>(j) * h, static_cast<double>(j + 1) * h});
    return s;
}

using Region = std::variant<Block, DenseCell>;

// Region containing (p, q). Ties on shared edges go to the block with the
// smallest (level, index); dense cells are only returned off every block.
inline Region locate(const PartitionScheme &scheme, double p, double q) {
    const double a = scheme.extent();
    if (!(p >= 0.0 && p <= a && q >= 0.0 && q <= a))
        throw domain_error("point (" + std::to_string(p) + ", " + std::to_string(q) + ") outside the partition domain");

    for (int level = scheme.coarsest_level(); level <= scheme.finest_level(); ++level) {
        const auto   blocks = scheme.level_blocks(level);
        const double h      = std::ldexp(1.0, -level);
        const auto   k      = static_cast<std::int64_t>(std::floor(p / h));
        for (std::int64_t cand : {k - 1, k}) {
            if (cand < 0 || cand >= static_cast<std::int64_t>(blocks.size()))
                continue;
            const Block &b = blocks[static_cast<std::size_t>(cand)];
            if (b.contains(p, q))
                return b;
        }
    }
    const auto   cells = scheme.dense_remainder();
    const double h     = std::ldexp(1.0, -scheme.finest_level());
    const auto   j     = static_cast<std::int64_t>(std::floor(p / h));
    for (std::int64_t cand : {j - 1, j}) {
        if (cand < 0 || cand >= static_cast<std::int64_t>(cells.size()))
            continue;
        if (cells[static_cast<std::size_t>(cand)].contains(p, q))
            return cells[static_cast<std::size_t>(cand)];
    }
    throw domain_error("point not covered by the partition");
}

struct TilingReport {
    std::size_t samples  = 0;
    double      covered  = 0.0; // fraction of samples inside at least one region
    std::size_t overlaps = 0;   // samples inside two or more regions
};

// Monte Carlo check that blocks and dense cells tile the domain. Membership
// is tested half-open against the stored geometry of every region whose
// p-interval could contain the sample.
inline TilingReport verify_tiling(const PartitionScheme &scheme, std::size_t samples, std::uint64_t seed = 0x5eed) {
    TilingReport report;
    report.samples = samples;
    if (samples == 0)
        return report;

    auto half_open = [](double x, double lo, double hi) { return x >= lo && x < hi; };

    std::mt19937_64                        rng(seed);
    std::uniform_real_distribution<double> unif(0.0, scheme.extent());
    std::size_t                            hit = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double p     = unif(rng);
        const double q     = unif(rng);
        int          count = 0;
        for (int level = scheme.coarsest_level(); level <= scheme.finest_level(); ++level) {
            const auto blocks = scheme.level_blocks(level);
            auto it = std::upper_bound(blocks.begin(), blocks.end(), p, [](double x, const Block &b) { return x < b.p_lo; });
            // p-intervals within a level are sorted; walk back while they can still hold p
            for (auto c = it; c != blocks.begin();) {
                --c;
                if (c->p_hi <= p)
                    break;
                if (half_open(p, c->p_lo, c->p_hi) && half_open(q, c->q_lo, c->q_hi))
                    ++count;
            }
        }
        const auto cells = scheme.dense_remainder();
        auto it = std::upper_bound(cells.begin(), cells.end(), p, [](double x, const DenseCell &c) { return x < c.lo; });
        for (auto c = it; c != cells.begin();) {
            --c;
            if (c->hi <= p)
                break;
            if (half_open(p, c->lo, c->hi) && half_open(q, c->lo, c->hi))
                ++count;
        }
        if (count >= 1)
            ++hit;
        if (count >= 2)
            ++report.overlaps;
    }
    report.covered = static_cast<double>(hit) / static_cast<double>(samples);
    return report;
}

} // namespace distlr

#pragma once
//
// HLRD1 container for a compressed HMatrix. Layout in docs/hlrd1-format.md;
// all integers and floats are little-endian.
//

#include <distlr/errors.hpp>
#include <distlr/hmatrix.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace distlr {

inline constexpr std::array<char, 5> hlrd_magic = {'H', 'L', 'R', 'D', '1'};

class format_error : public error {
  public:
    using error::error;
};

namespace detail {

template <typename T>
void put(std::ostream &os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char *>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream &is) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!is.read(reinterpret_cast<char *>(bytes.data()), sizeof(T)))
        throw format_error("HLRD1: unexpected end of stream");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void put_matrix(std::ostream &os, const Matrix &M) {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            put<double>(os, M(i, j));
}

inline Matrix get_matrix(std::istream &is, std::int64_t r, std::int64_t c) {
    Matrix M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            M(i, j) = get<double>(is);
    return M;
}

inline void put_slot(std::ostream &os, const Slot &s) {
    put<std::uint8_t>(os, static_cast<std::uint8_t>(s.kind));
    put<std::int32_t>(os, s.level);
    put<std::int64_t>(os, s.index);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(s.rows.begin));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(s.rows.end));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(s.cols.begin));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(s.cols.end));
}

inline Slot get_slot(std::istream &is) {
    Slot s;
    const auto kind = get<std::uint8_t>(is);
    if (kind > 3)
        throw format_error("HLRD1: unknown block kind " + std::to_string(kind));
    s.kind       = static_cast<SlotKind>(kind);
    s.level      = get<std::int32_t>(is);
    s.index      = get<std::int64_t>(is);
    s.rows.begin = static_cast<std::int64_t>(get<std::uint64_t>(is));
    s.rows.end   = static_cast<std::int64_t>(get<std::uint64_t>(is));
    s.cols.begin = static_cast<std::int64_t>(get<std::uint64_t>(is));
    s.cols.end   = static_cast<std::int64_t>(get<std::uint64_t>(is));
    if (s.rows.end < s.rows.begin || s.cols.end < s.cols.begin)
        throw format_error("HLRD1: malformed block range");
    return s;
}

} // namespace detail

inline void save(const HMatrix &h, std::ostream &os) {
    using namespace detail;
    os.write(hlrd_magic.data(), hlrd_magic.size());

    const auto &spec = h.spec();
    put<std::uint8_t>(os, static_cast<std::uint8_t>(spec.index()));
    if (auto *b = std::get_if<Binomial>(&spec)) {
        put<std::int64_t>(os, b->n);
        put<std::int64_t>(os, b->columns);
    } else if (auto *p = std::get_if<Poisson>(&spec)) {
        put<std::int64_t>(os, p->k_max);
        put<double>(os, p->lambda_max);
        put<std::int64_t>(os, p->lambda_grid);
    } else {
        const auto &c = std::get<ChiSquared>(spec);
        put<double>(os, c.x_max);
        put<std::int64_t>(os, c.x_grid);
        put<std::int64_t>(os, c.k_max);
    }
    put<std::uint8_t>(os, static_cast<std::uint8_t>(h.builder()));
    put<double>(os, h.eps());

    const auto &dom = h.scheme().domain();
    put<std::uint8_t>(os, static_cast<std::uint8_t>(dom.kind));
    put<double>(os, dom.extent);
    put<std::int32_t>(os, dom.finest_level);

    put<std::uint64_t>(os, static_cast<std::uint64_t>(h.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(h.cols()));
    put<std::uint64_t>(os, h.lowrank_blocks().size());
    put<std::uint64_t>(os, h.dense_blocks().size());

    for (const auto &b : h.lowrank_blocks()) {
        put_slot(os, b.slot);
        put<std::uint64_t>(os, static_cast<std::uint64_t>(b.rank()));
    }
    for (const auto &b : h.dense_blocks())
        put_slot(os, b.slot);

    for (const auto &b : h.lowrank_blocks()) {
        put_matrix(os, b.U);
        put_matrix(os, b.V);
    }
    for (const auto &b : h.dense_blocks())
        put_matrix(os, b.data);
    if (!os)
        throw error("HLRD1: write failed");
}

inline HMatrix load(std::istream &is) {
    using namespace detail;
    std::array<char, 5> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != hlrd_magic)
        throw format_error("HLRD1: bad magic bytes");

    FamilySpec spec;
    switch (get<std::uint8_t>(is)) {
    case 0: {
        const auto n = get<std::int64_t>(is);
        const auto c = get<std::int64_t>(is);
        spec         = Binomial{static_cast<int>(n), static_cast<int>(c)};
        break;
    }
    case 1: {
        const auto k   = get<std::int64_t>(is);
        const auto lam = get<double>(is);
        const auto g   = get<std::int64_t>(is);
        spec           = Poisson{static_cast<int>(k), lam, static_cast<int>(g)};
        break;
    }
    case 2: {
        const auto x = get<double>(is);
        const auto g = get<std::int64_t>(is);
        const auto k = get<std::int64_t>(is);
        spec         = ChiSquared{x, static_cast<int>(g), static_cast<int>(k)};
        break;
    }
    default: throw format_error("HLRD1: unknown family tag");
    }
    const auto builder = get<std::uint8_t>(is);
    if (builder > 1)
        throw format_error("HLRD1: unknown builder tag");
    const double eps = get<double>(is);

    DomainDescriptor dom;
    const auto       dkind = get<std::uint8_t>(is);
    if (dkind > 1)
        throw format_error("HLRD1: unknown domain kind");
    dom.kind         = static_cast<DomainKind>(dkind);
    dom.extent       = get<double>(is);
    dom.finest_level = get<std::int32_t>(is);

    const auto m = static_cast<std::int64_t>(get<std::uint64_t>(is));
    const auto n = static_cast<std::int64_t>(get<std::uint64_t>(is));
    if (m != rows(spec) || n != cols(spec))
        throw format_error("HLRD1: dimensions do not match the family parameters");
    const auto nlow   = get<std::uint64_t>(is);
    const auto ndense = get<std::uint64_t>(is);

    std::vector<LowRankBlock> lowrank(nlow);
    std::vector<std::int64_t> ranks(nlow);
    for (std::uint64_t t = 0; t < nlow; ++t) {
        lowrank[t].slot = get_slot(is);
        ranks[t]        = static_cast<std::int64_t>(get<std::uint64_t>(is));
    }
    std::vector<DenseBlock> dense(ndense);
    for (auto &b : dense)
        b.slot = get_slot(is);

    for (std::uint64_t t = 0; t < nlow; ++t) {
        auto &b = lowrank[t];
        b.U     = get_matrix(is, b.slot.rows.size(), ranks[t]);
        b.V     = get_matrix(is, b.slot.cols.size(), ranks[t]);
    }
    for (auto &b : dense)
        b.data = get_matrix(is, b.slot.rows.size(), b.slot.cols.size());

    return HMatrix(spec, build(dom), eps, static_cast<Builder>(builder), std::move(lowrank), std::move(dense));
}

inline void save(const HMatrix &h, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw error("cannot open " + path + " for writing");
    save(h, os);
}

inline HMatrix load(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw error("cannot open " + path + " for reading");
    return load(is);
}

} // namespace distlr

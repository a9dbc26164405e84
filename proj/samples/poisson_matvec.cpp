// Compress a 1025 x 1024 Poisson matrix and apply it to a vector.

#include <distlr/distlr.hpp>

#include <cstdio>

int main() {
    using namespace distlr;

    const auto spec = make_poisson(1024, 1024.0, 1024);
    const auto h    = compress(spec, 1e-8, {Builder::Constructive});

    const auto rep = storage_report(h);
    std::printf("%lld x %lld, %zu low-rank blocks, storage ratio %.4f\n", (long long)h.rows(), (long long)h.cols(),
                h.lowrank_blocks().size(), rep.ratio);
    for (auto [level, r] : rep.per_level_ranks)
        std::printf("  level %3d  max rank %d\n", level, r);

    // column sums of the transpose: sum over lambda of each pmf row
    const Vector ones = Vector::Ones(h.cols());
    const Vector y    = h.matvec(ones);
    const Vector ref  = dense_matrix(spec) * ones;
    std::printf("matvec relative error %.3e\n", (y - ref).norm() / ref.norm());

    const auto v = verify(h, 10000);
    std::printf("sampled max |error| %.3e\n", v.max_abs_error);
}

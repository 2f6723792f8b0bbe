#include <gtest/gtest.h>

#include "hcspmm/oracle.hpp"
#include "hcspmm/random.hpp"
#include "hcspmm/spmm.hpp"

using namespace hcspmm;

namespace {

Assignment random_assignment(std::size_t n, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    Assignment a(n);
    for (auto& p : a) p = coin(rng) ? Path::Tile : Path::Scalar;
    return a;
}

}  // namespace

TEST(SpmmScalar, IdentityAndEmptyRow) {
    Rng rng(1);
    const auto x = random_dense<double>(20, 5, rng);
    EXPECT_EQ(spmm_scalar(identity_csr<double>(20), x).z, x);

    const auto a = csr_from_triplets<double>(3, 3, {{0, 1, 2.0}, {2, 2, 1.0}});
    DenseMatrix<double> y(3, 2, 1.0);
    const auto z = spmm_scalar(a, y).z;
    EXPECT_EQ(z(1, 0), 0.0);
    EXPECT_EQ(z(1, 1), 0.0);
    EXPECT_EQ(z(0, 0), 2.0);
}

TEST(SpmmScalar, MatchesDenseOracle) {
    Rng rng(2);
    const auto a = random_csr<double>(64, 64, 0.1, rng);
    const auto x = random_dense<double>(64, 32, rng);
    EXPECT_LE(max_relative_error(spmm_scalar(a, x).z, spmm_dense_oracle(a, x)), 1e-12);
    EXPECT_THROW(spmm_scalar(a, DenseMatrix<double>(63, 2)), InputError);
}

TEST(SpmmTile, SingleEntryWindow) {
    const auto a = csr_from_triplets<double>(16, 8, {{3, 7, 2.0}});
    DenseMatrix<double> x(8, 5);
    for (index_t j = 0; j < 5; ++j) x(7, j) = 1.0;
    const auto res = spmm_tile(partition(a), x);
    for (index_t r = 0; r < 16; ++r)
        for (index_t j = 0; j < 5; ++j) EXPECT_EQ(res.z(r, j), r == 3 ? 2.0 : 0.0);
    EXPECT_EQ(res.stats.tiles_processed, 1);
}

TEST(SpmmTile, NineColumnsUseTwoBlocksAndPaddingIsInert) {
    std::vector<Triplet<double>> e;
    for (index_t c = 0; c < 9; ++c) e.push_back({c % 16, c * 3, 0.5 + static_cast<double>(c)});
    const auto a = csr_from_triplets<double>(16, 27, e);
    Rng rng(3);
    const auto x = random_dense<double>(27, 19, rng);
    const auto p = partition(a);
    ASSERT_EQ(p[0].ncols(), 9);
    const auto tile = spmm_tile(p, x);
    EXPECT_EQ(tile.stats.tiles_processed, 2);
    EXPECT_EQ(tile.z, spmm_scalar(a, x).z);
}

TEST(SpmmTile, AgreesWithScalarOnRandomInputs) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<index_t> nd(1, 150), dd(1, 70);
        const index_t n = nd(rng), dim = dd(rng);
        const auto a = random_csr<double>(n, n, 0.06, rng);
        const auto x = random_dense<double>(n, dim, rng);
        const auto s = spmm_scalar(a, x).z;
        const auto t = spmm_tile(partition(a), x, 2).z;
        EXPECT_LE(max_abs_diff(s, t), 1e-12);
    }
}

TEST(SpmmTile, PartialDimBlocks) {
    Rng rng(5);
    const auto a = random_csr<double>(40, 40, 0.2, rng);
    const auto x = random_dense<double>(40, 47, rng);
    for (index_t dt : {index_t{1}, index_t{5}, index_t{16}, index_t{64}})
        EXPECT_LE(max_abs_diff(spmm_tile(partition(a), x, 1, dt).z, spmm_dense_oracle(a, x)), 1e-12);
}

TEST(SpmmTile, RejectsBadInputs) {
    const auto a = identity_csr<double>(20);
    EXPECT_THROW(spmm_tile(partition(a), DenseMatrix<double>(19, 3)), InputError);
    auto p = partition(a);
    p.windows[0].nonzero_cols[0] = 99;
    EXPECT_THROW(spmm_tile(p, DenseMatrix<double>(20, 3)), InputError);
    EXPECT_THROW(spmm_tile(partition(a, 20), DenseMatrix<double>(20, 3)), InputError);
}

TEST(SpmmHybrid, DegenerateAssignments) {
    Rng rng(6);
    const auto a = random_csr<double>(100, 100, 0.05, rng);
    const auto x = random_dense<double>(100, 24, rng);
    const auto p = partition(a);
    const auto all_scalar = spmm_hybrid(p, Assignment(p.size(), Path::Scalar), x);
    EXPECT_EQ(all_scalar.z.data, spmm_scalar(a, x).z.data);  // bitwise
    const auto all_tile = spmm_hybrid(p, Assignment(p.size(), Path::Tile), x);
    EXPECT_EQ(all_tile.z, spmm_tile(p, x).z);
    EXPECT_THROW(spmm_hybrid(p, Assignment(p.size() + 1, Path::Tile), x), InputError);
}

TEST(SpmmHybrid, MixedMatchesOracleAndConservesStats) {
    Rng rng(7);
    for (int trial = 0; trial < 15; ++trial) {
        const auto a = random_csr<double>(130, 130, 0.04, rng);
        const auto x = random_dense<double>(130, 33, rng);
        const auto p = partition(a);
        const auto assign = random_assignment(p.size(), rng);
        const auto res = spmm_hybrid(p, assign, x, 4);
        EXPECT_LE(max_relative_error(res.z, spmm_dense_oracle(a, x)), 1e-12);

        index_t nonempty = 0;
        for (const auto& w : p) nonempty += !w.empty();
        EXPECT_EQ(res.stats.windows_scalar + res.stats.windows_tile, nonempty);
        EXPECT_EQ(res.stats.entries_scalar + res.stats.entries_tile, a.nnz());
    }
}

TEST(SpmmHybrid, RowDisjointness) {
    Rng rng(8);
    const auto a = random_csr<double>(80, 80, 0.1, rng);
    const auto x = random_dense<double>(80, 16, rng, -1e6, 1e6);  // large values expose rounding
    const auto p = partition(a);
    const auto assign = random_assignment(p.size(), rng);
    const auto base = spmm_hybrid(p, assign, x).z;
    for (std::size_t flip = 0; flip < p.size(); ++flip) {
        auto other = assign;
        other[flip] = other[flip] == Path::Tile ? Path::Scalar : Path::Tile;
        const auto z = spmm_hybrid(p, other, x).z;
        for (index_t r = 0; r < 80; ++r) {
            if (r >= p[flip].row_start && r < p[flip].row_start + p[flip].row_count) continue;
            for (index_t j = 0; j < 16; ++j) ASSERT_EQ(z(r, j), base(r, j));
        }
    }
}

TEST(SpmmHybrid, LinearityUnderPowerOfTwoScaling) {
    Rng rng(9);
    const auto a = random_csr<double>(60, 60, 0.1, rng);
    const auto x = random_dense<double>(60, 8, rng);
    const auto p = partition(a);
    const auto assign = random_assignment(p.size(), rng);
    const auto z_hybrid = spmm_hybrid(p, assign, x).z;
    const auto z_scalar = spmm_scalar(a, x).z;
    auto scaled = [](DenseMatrix<double> m, double alpha) {
        for (auto& v : m.data) v *= alpha;
        return m;
    };
    for (double alpha : {0.25, 2.0, 1024.0}) {
        const auto xs = scaled(x, alpha);
        EXPECT_EQ(spmm_hybrid(p, assign, xs).z, scaled(z_hybrid, alpha));
        EXPECT_EQ(spmm_scalar(a, xs).z, scaled(z_scalar, alpha));
    }
}

TEST(SpmmHybrid, SinglePrecisionWithinTolerance) {
    Rng rng(10);
    const auto a = random_csr<double>(200, 200, 0.05, rng);
    const auto x = random_dense<double>(200, 32, rng);
    const auto ref = spmm_dense_oracle(a, x);
    const auto af = a.cast<float>();
    const auto xf = x.cast<float>();
    const auto pf = partition(af);
    const auto assign = random_assignment(pf.size(), rng);
    EXPECT_LE(max_relative_error(spmm_scalar(af, xf).z, ref), 1e-5);
    EXPECT_LE(max_relative_error(spmm_tile(pf, xf).z, ref), 1e-5);
    EXPECT_LE(max_relative_error(spmm_hybrid(pf, assign, xf).z, ref), 1e-5);
}

TEST(SpmmHybrid, ThreadCountDoesNotChangeResult) {
    Rng rng(12);
    const auto a = random_csr<double>(300, 300, 0.03, rng);
    const auto x = random_dense<double>(300, 20, rng);
    const auto p = partition(a);
    const auto assign = random_assignment(p.size(), rng);
    const auto one = spmm_hybrid(p, assign, x, 1);
    const auto many = spmm_hybrid(p, assign, x, 7);
    EXPECT_EQ(one.z, many.z);
    EXPECT_EQ(one.stats, many.stats);
}

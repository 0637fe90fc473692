#include <gtest/gtest.h>

#include "pcl/bath.hpp"
#include "pcl/dissipaton_algebra.hpp"
#include "pcl/hierarchy.hpp"
#include "oracles.hpp"

using namespace pcl;
using namespace pcl::hierarchy;
using pcl::reference::composed;

namespace {

bath::DissipatonSpectrum fig2_spectrum() {
    return bath::matsubara_decompose_drude(bath::SpectralDensity::drude(1.0, 1.0), 0.5, 2);
}

bath::DissipatonSpectrum single_term() {
    return bath::matsubara_decompose_drude(bath::SpectralDensity::drude(1.0, 1.0), 0.5, 1);
}

} // namespace

TEST(Enumerate, SmallCases) {
    const auto a = enumerate_indices(1, 2);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].counts, Counts{i});
    const auto b = enumerate_indices(2, 1);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0].counts, (Counts{0, 0}));
    EXPECT_EQ(b[1].counts, (Counts{1, 0}));
    EXPECT_EQ(b[2].counts, (Counts{0, 1}));
    EXPECT_EQ(enumerate_indices(2, 6).size(), 28u);
}

TEST(Enumerate, CountIsBinomial) {
    for (std::size_t K = 1; K <= 4; ++K)
        for (std::size_t L = 0; L <= 7; ++L)
            EXPECT_EQ(enumerate_indices(K, L).size(), static_cast<std::size_t>(algebra::binomial(L + K, K)));
    EXPECT_THROW(enumerate_indices(0, 3), config_error);
}

TEST(Enumerate, OrderedByTier) {
    const auto idx = enumerate_indices(3, 5);
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LE(idx[i - 1].tier(), idx[i].tier());
    for (const auto& m : idx) EXPECT_LE(m.tier(), 5u);
}

TEST(Lookup, InverseOfEnumeration) {
    const auto idx = enumerate_indices(2, 6);
    EXPECT_EQ(idx.lookup({0, 0}), 0u);
    EXPECT_TRUE(idx.lookup({6, 0}).has_value());
    EXPECT_FALSE(idx.lookup({7, 0}).has_value());
    EXPECT_FALSE(idx.lookup({1, 1, 0}).has_value());
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx.lookup(idx[i].counts), i);
}

TEST(PclTable, SpecExamples) {
    const auto s = single_term();
    const double lambda = 0.5;
    const auto t = build_pcl_coupling(s, lambda, 6);
    const double g = t.g;
    EXPECT_NEAR(g, std::exp(-lambda * lambda * s.eta[0].real() / 2.0), 1e-15);
    EXPECT_LT(std::abs(t.left(0, 0) - 2.0 * g), 1e-14);
    EXPECT_LT(std::abs(t.right(0, 0) - 2.0 * g), 1e-14);
    EXPECT_LT(std::abs(t.left(0, 2) + g * lambda * lambda), 1e-14);
    EXPECT_LT(std::abs(t.left(1, 1) - g * (2.0 - 2.0 * lambda * lambda * s.eta[0])), 1e-14);
    EXPECT_LT(std::abs(t.right(1, 1) - g * (2.0 - 2.0 * lambda * lambda * std::conj(s.eta[0]))), 1e-14);
}

TEST(PclTable, MatchesContractionOracleBothConventions) {
    const auto s = single_term();
    for (double lambda : {0.5, 1.3})
        for (auto conv : {SignConvention::even, SignConvention::odd_paper_literal}) {
            const auto t = build_pcl_coupling(s, lambda, 6, conv);
            for (std::size_t n = 0; n <= 3; ++n)
                for (std::size_t np = 0; np <= 6; ++np) {
                    const cplx l = composed(n, np, lambda, s.eta[0], t.g, conv);
                    const cplx r = composed(n, np, lambda, std::conj(s.eta[s.pair[0]]), t.g, conv);
                    EXPECT_LT(std::abs(t.left(n, np) - l), 1e-12) << "n=" << n << " n'=" << np;
                    EXPECT_LT(std::abs(t.right(n, np) - r), 1e-12) << "n=" << n << " n'=" << np;
                }
        }
}

TEST(PclTable, ParitySelection) {
    const auto s = fig2_spectrum();
    for (auto conv : {SignConvention::even, SignConvention::odd_paper_literal}) {
        const auto t = build_pcl_coupling(s, 0.7, 5, conv);
        EXPECT_GT(t.nnz(), 0u);
        for (std::size_t r = 0; r < t.size(); ++r)
            for (const auto& e : t.rows[r]) {
                const long delta = static_cast<long>(t.indices[e.column].tier()) - static_cast<long>(t.indices[r].tier());
                EXPECT_EQ(delta % 2 == 0, conv == SignConvention::even);
            }
    }
}

TEST(PclTable, LambdaZeroLimit) {
    const auto s = fig2_spectrum();
    const auto even = build_pcl_coupling(s, 0.0, 4);
    EXPECT_EQ(even.g, 1.0);
    for (std::size_t r = 0; r < even.size(); ++r) {
        ASSERT_EQ(even.rows[r].size(), 1u);
        EXPECT_EQ(even.rows[r][0].column, r);
        EXPECT_EQ(even.rows[r][0].left, cplx(2.0));
        EXPECT_EQ(even.rows[r][0].right, cplx(2.0));
    }
    EXPECT_EQ(build_pcl_coupling(s, 0.0, 4, SignConvention::odd_paper_literal).nnz(), 0u);
}

TEST(PclTable, TracePreservingRow) {
    const auto s = fig2_spectrum();
    const auto t = build_pcl_coupling(s, 0.9, 6);
    for (const auto& e : t.rows[0]) EXPECT_EQ(e.left, e.right);
}

TEST(PclTable, PrunesTinyEntries) {
    const auto t = build_pcl_coupling(fig2_spectrum(), 0.5, 6);
    double amax = 0.0;
    for (const auto& r : t.rows)
        for (const auto& e : r) amax = std::max({amax, std::abs(e.left), std::abs(e.right)});
    for (const auto& r : t.rows)
        for (const auto& e : r) EXPECT_GE(std::max(std::abs(e.left), std::abs(e.right)), 1e-14 * amax);
}

TEST(ClTable, Structure) {
    const auto s = fig2_spectrum();
    const auto t = build_cl_coupling(s, 4);
    ASSERT_EQ(t.rows[0].size(), 2u);
    for (const auto& e : t.rows[0]) {
        EXPECT_EQ(t.indices[e.column].tier(), 1u);
        EXPECT_EQ(e.left, cplx(1.0));
        EXPECT_EQ(e.right, cplx(1.0));
    }
    const std::size_t r10 = *t.indices.lookup({1, 0});
    EXPECT_EQ(t.left(r10, 0), s.eta[0]);
    EXPECT_EQ(t.right(r10, 0), std::conj(s.eta[s.pair[0]]));
    const std::size_t r20 = *t.indices.lookup({2, 0});
    const std::size_t r10b = *t.indices.lookup({1, 0});
    EXPECT_EQ(t.left(r20, r10b), 2.0 * s.eta[0]);
    for (std::size_t r = 0; r < t.size(); ++r)
        for (const auto& e : t.rows[r]) {
            const long d = static_cast<long>(t.indices[e.column].tier()) - static_cast<long>(t.indices[r].tier());
            EXPECT_EQ(std::abs(d), 1);
        }
}

TEST(ClTable, UsesPairedCoefficientOnTheRight) {
    const auto s = bath::discrete_mode_decompose(1.0, 0.3, 0.5);
    const auto t = build_cl_coupling(s, 3);
    const std::size_t r = *t.indices.lookup({1, 0});
    EXPECT_EQ(t.right(r, 0), std::conj(s.eta[1]));
    EXPECT_EQ(t.left(r, 0), s.eta[0]);
}

TEST(Table, DumpAndTranspose) {
    const auto t = build_pcl_coupling(fig2_spectrum(), 0.5, 3);
    const std::string dump = t.dump();
    EXPECT_NE(dump.find("kind=pcl convention=even"), std::string::npos);
    std::size_t lines = 0;
    for (char c : dump) lines += c == '\n';
    EXPECT_EQ(lines, t.nnz() + 1);
    const auto AT = transposed_weights(t, true);
    for (std::size_t r = 0; r < t.size(); ++r)
        for (const auto& e : t.rows[r])
            EXPECT_EQ(AT.coeff(static_cast<int>(e.column), static_cast<int>(r)), e.left);
}

TEST(Table, RejectsInvalidSpectrum) {
    auto s = fig2_spectrum();
    s.pair = {1, 1};
    EXPECT_THROW(build_pcl_coupling(s, 0.5, 2), validation_error);
    EXPECT_THROW(build_cl_coupling(s, 2), validation_error);
}

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "pcdetect/attacks.hpp"
#include "support/oracles.hpp"

using namespace pcdetect;

namespace {

const oracle::Rows kConsistent3 = {{1, 2, 2}, {0.5, 1, 1}, {0.5, 1, 1}};

AttackConfig config(std::size_t p, std::size_t r, double alpha)
{
    AttackConfig cfg;
    cfg.p = p;
    cfg.r = r;
    cfg.alpha = alpha;
    return cfg;
}

void expect_matrix(const PCMatrix& c, const oracle::Rows& expect, double tol = 1e-12)
{
    ASSERT_EQ(c.order(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
        for (std::size_t j = 0; j < expect.size(); ++j)
            EXPECT_NEAR(c(i, j), expect[i][j], tol) << "(" << i << "," << j << ")";
}

void expect_reciprocal(const PCMatrix& c)
{
    for (std::size_t i = 0; i < c.order(); ++i) {
        EXPECT_EQ(c(i, i), 1.0);
        for (std::size_t j = 0; j < c.order(); ++j)
            EXPECT_NEAR(c(i, j) * c(j, i), 1.0, 1e-12);
    }
}

// Every changed entry lies in row p or column p.
void expect_local(const PCMatrix& before, const PCMatrix& after, std::size_t p)
{
    for (std::size_t i = 0; i < before.order(); ++i)
        for (std::size_t j = 0; j < before.order(); ++j)
            if (i != p && j != p)
                EXPECT_EQ(before(i, j), after(i, j)) << "(" << i << "," << j << ") changed, p=" << p;
}

} // namespace

TEST(AttackNaive, DirectSubstitution)
{
    const auto out = attack_naive(build_matrix(kConsistent3), config(1, 0, 3.0));
    expect_matrix(out.attacked, {{1, 1.0 / 3, 2}, {3, 1, 3}, {0.5, 1.0 / 3, 1}});
    EXPECT_EQ(out.steps_taken, 2);
    EXPECT_EQ(out.modified_pairs.size(), 4u);
}

TEST(AttackNaive, PromotedEqualsReference)
{
    try {
        attack_naive(build_matrix(kConsistent3), config(1, 1, 3.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PromotedEqualsReference);
    }
}

TEST(AttackNaive, AlphaAboveMaxPromotesToTop)
{
    const std::vector<double> w{0.4, 0.1, 0.2, 0.2, 0.1};
    const auto c = consistent_from_weights(w);
    ASSERT_NEAR(c.max_entry(), 4.0, 1e-12);
    const auto out = attack_naive(c, config(1, 0, 5.0));
    EXPECT_FALSE(out.alpha_not_above_max);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(oracle::argmax(oracle::gmm(out.attacked)), 1u);
}

TEST(AttackNaive, FlagsAlphaNotAboveMax)
{
    const std::vector<double> w{0.4, 0.1, 0.2, 0.2, 0.1};
    EXPECT_TRUE(attack_naive(consistent_from_weights(w), config(1, 0, 4.0)).alpha_not_above_max);
}

TEST(AttackBasic, HandTrace)
{
    const auto out = attack_basic(build_matrix(kConsistent3), config(1, 2, 2.0));
    expect_matrix(out.attacked, {{1, 1, 2}, {1, 1, 2}, {0.5, 0.5, 1}});
    EXPECT_EQ(out.steps_taken, 2);
}

TEST(AttackBasic, UnitAlphaCopiesReferenceRow)
{
    oracle::Gen g(17);
    const auto c = oracle::random_perturbed(6, g);
    const auto out = attack_basic(c, config(4, 1, 1.0));
    for (std::size_t i = 0; i < 6; ++i)
        if (i != 4)
            EXPECT_EQ(out.attacked(4, i), c(1, i));
}

TEST(AttackBasic, RaisesPromotedWeight)
{
    oracle::Gen g(606);
    for (int trial = 0; trial < 100; ++trial) {
        // The reference is the current leader, as in the generation protocol.
        const auto c = oracle::random_perturbed(6, g);
        const std::size_t r = oracle::argmax(oracle::perron_vector(c));
        const std::size_t p = (r + 1 + g.index(5)) % 6;
        const auto out = attack_basic(c, config(p, r, 3.0));
        EXPECT_GT(oracle::gmm(out.attacked)[p], oracle::gmm(c)[p]);
    }
}

TEST(AttackAdvanced, StopsAfterFirstUpdate)
{
    const std::vector<double> w{0.26, 0.25, 0.24, 0.25};
    const auto out = attack_advanced(consistent_from_weights(w), config(1, 0, 5.0));
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.steps_taken, 1);
    ASSERT_EQ(out.modified_pairs.size(), 2u);
    const auto o = oracle::gmm(out.attacked);
    EXPECT_GT(o[1], o[0]);
}

TEST(AttackAdvanced, FullRowWhenRankingCannotFlip)
{
    // A fully copied row leaves GMM(p)/GMM(r) = alpha, so alpha < 1 never flips.
    const std::vector<double> w{0.9, 0.03, 0.03, 0.04};
    const auto out = attack_advanced(consistent_from_weights(w), config(1, 0, 0.5));
    EXPECT_EQ(out.steps_taken, 3);
    EXPECT_FALSE(out.success);
    const auto o = oracle::gmm(out.attacked);
    EXPECT_LT(o[1], o[0]);
}

TEST(AttackAdvanced, AlphaAboveOneAlwaysFlipsOnFullRow)
{
    // Row products differ by alpha^n after a full copy, so GMM(p)/GMM(r) =
    // alpha and any alpha > 1 ends with success, even w_r = 0.9 vs w_p = 0.03.
    const std::vector<double> w{0.9, 0.03, 0.03, 0.04};
    const auto c = consistent_from_weights(w);
    const auto basic = attack_basic(c, config(1, 0, 1.1));
    const auto o = oracle::gmm(basic.attacked);
    EXPECT_NEAR(std::log(o[1] / o[0]), std::log(1.1), 1e-12);
    EXPECT_TRUE(attack_advanced(c, config(1, 0, 1.1)).success);
}

TEST(AttackAdvanced, PromotedEqualsReference)
{
    EXPECT_THROW(attack_advanced(build_matrix(kConsistent3), config(2, 2, 2.0)), Error);
}

TEST(AttackAdvanced, StopCheckDisabledMatchesBasic)
{
    oracle::Gen g(9);
    const auto c = oracle::random_perturbed(7, g);
    auto cfg = config(3, 5, 2.5);
    cfg.stop_check = false;
    EXPECT_EQ(attack_advanced(c, cfg).attacked, attack_basic(c, cfg).attacked);
}

TEST(SelectTargets, ForcedArgmax)
{
    const std::vector<double> w{0.6, 0.3, 0.1};
    const auto c = consistent_from_weights(w);
    std::set<std::size_t> seen;
    for (std::uint64_t s = 0; s < 50; ++s) {
        RngStream rng(s);
        const auto t = select_targets(c, rng);
        EXPECT_EQ(t.r, 0u);
        EXPECT_NE(t.p, 0u);
        seen.insert(t.p);
    }
    EXPECT_EQ(seen, (std::set<std::size_t>{1, 2}));
}

TEST(SelectTargets, LowestIndexTieBreak)
{
    RngStream rng(1);
    EXPECT_EQ(select_targets(build_matrix(oracle::Rows(5, std::vector<double>(5, 1.0))), rng).r, 0u);
}

TEST(SelectTargets, DeterministicReplay)
{
    oracle::Gen g(3);
    const auto c = oracle::random_perturbed(5, g);
    RngStream a(42), b(42);
    const auto ta = select_targets(c, a);
    const auto tb = select_targets(c, b);
    EXPECT_EQ(ta.r, tb.r);
    EXPECT_EQ(ta.p, tb.p);
}

TEST(Properties, ReciprocityAndLocality)
{
    oracle::Gen g(31337);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = oracle::random_perturbed(n, g, g.uniform(1.01, 4.0));
        const std::size_t p = g.index(n);
        const std::size_t r = (p + 1 + g.index(n - 1)) % n;
        const double alpha = g.uniform(0.2, 9.0);
        for (auto algo : {AttackAlgorithm::Naive, AttackAlgorithm::Basic, AttackAlgorithm::Advanced}) {
            const auto out = run_attack(algo, c, config(p, r, alpha));
            expect_reciprocal(out.attacked);
            expect_local(c, out.attacked, p);
            for (auto [i, j] : out.modified_pairs)
                EXPECT_TRUE(i == p || j == p);
        }
    }
}

TEST(Properties, AdvancedStopPostcondition)
{
    oracle::Gen g(2718);
    int successes = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = oracle::random_perturbed(n, g);
        const std::size_t p = g.index(n);
        const std::size_t r = (p + 1 + g.index(n - 1)) % n;
        for (auto method : {PriorityMethod::GMM, PriorityMethod::EVM}) {
            auto cfg = config(p, r, g.uniform(1.1, 5.0));
            cfg.method = method;
            const auto out = attack_advanced(c, cfg);
            EXPECT_GE(out.steps_taken, 1);
            EXPECT_LE(out.steps_taken, static_cast<int>(n) - 1);
            if (!out.success)
                continue;
            ++successes;
            const auto w = method == PriorityMethod::GMM ? oracle::gmm(out.attacked)
                                                          : oracle::perron_vector(out.attacked);
            EXPECT_GT(w[p], w[r]);
        }
    }
    EXPECT_GT(successes, 0);
}

TEST(Properties, NaiveArgmaxIsPromoted)
{
    oracle::Gen g(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = oracle::random_perturbed(n, g, g.uniform(1.01, 3.0));
        const std::size_t p = g.index(n);
        const double alpha = c.max_entry() * g.uniform(1.0001, 3.0);
        const auto out = attack_naive(c, config(p, (p + 1) % n, alpha));
        EXPECT_EQ(oracle::argmax(oracle::gmm(out.attacked)), p);
    }
}

TEST(Provenance, JsonRoundTrip)
{
    const auto out = attack_advanced(build_matrix(kConsistent3), config(1, 0, 3.0));
    const auto p = provenance_of(out);
    EXPECT_EQ(provenance_from_json(provenance_to_json(p)), p);
}

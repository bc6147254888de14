#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "folde/zeroshot.hpp"
#include "support.hpp"

using namespace folde;

namespace {

// Log-prob rows built from logits where the wild-type residue has logit 0, so
// the naturalness of X->Y is (up to rounding) logit(Y).
struct LogitTable {
    std::string reference;
    std::vector<double> logits;

    explicit LogitTable(std::string ref) : reference(std::move(ref)), logits(reference.size() * kAlphabetSize, -8.0) {
        for (std::size_t p = 0; p < reference.size(); ++p) set(std::uint32_t(p + 1), reference[p], 0.0);
    }
    void set(std::uint32_t pos, char aa, double logit) {
        logits[(pos - 1) * kAlphabetSize + std::size_t(aa_index(aa))] = logit;
    }
    LogProbMatrix matrix() const { return LogProbMatrix::from_logits(reference.size(), logits); }
};

// A normalized row with chosen values for two residues.
std::vector<double> row_with(char wt, double lp_wt, char mut, double lp_mut) {
    const double rest = std::log((1.0 - std::exp(lp_wt) - std::exp(lp_mut)) / 18.0);
    std::vector<double> row(kAlphabetSize, rest);
    row[std::size_t(aa_index(wt))] = lp_wt;
    row[std::size_t(aa_index(mut))] = lp_mut;
    return row;
}

}  // namespace

TEST(Naturalness, WildTypeIsZero) {
    std::mt19937_64 rng(1);
    const auto lp = folde::testing::random_logprobs(10, rng);
    EXPECT_EQ(naturalness_score(Variant::wild_type(), lp, "ACDEFGHIKL"), 0.0);
}

TEST(Naturalness, SingleSiteArithmetic) {
    const LogProbMatrix lp(1, row_with('A', -3.0, 'C', -1.0));
    EXPECT_DOUBLE_EQ(naturalness_score(parse_variant("A1C", "A"), lp, "A"), 2.0);
}

TEST(Naturalness, TwoSitesAdd) {
    auto r1 = row_with('A', -2.0, 'C', -1.0);   // +1.0
    auto r2 = row_with('D', -1.0, 'E', -1.5);   // -0.5
    r1.insert(r1.end(), r2.begin(), r2.end());
    const LogProbMatrix lp(2, r1);
    EXPECT_NEAR(naturalness_score(parse_variant("A1C:D2E", "AD"), lp, "AD"), 0.5, 1e-12);
}

TEST(Naturalness, PositionOutOfRange) {
    std::mt19937_64 rng(1);
    const auto lp = folde::testing::random_logprobs(3, rng);
    EXPECT_THROW(naturalness_score(parse_variant_text("A4C"), lp, "ACDA"), InvariantError);
}

TEST(Naturalness, MultiMutantEqualsSumOfSingles) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
        const auto ref = folde::testing::random_sequence(25, rng);
        const auto lp = folde::testing::random_logprobs(25, rng);
        const auto v = folde::testing::random_variant(ref, 1 + std::size_t(t % 8), rng);
        double sum = 0.0;
        for (const auto& m : v.mutations()) sum += naturalness_score(Variant({m}), lp, ref);
        EXPECT_NEAR(naturalness_score(v, lp, ref), sum, 1e-12);
    }
}

TEST(Naturalness, RowShiftInvariance) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> shift(-9e-4, 0.0);
    for (int t = 0; t < 50; ++t) {
        const auto ref = folde::testing::random_sequence(12, rng);
        const auto lp = folde::testing::random_logprobs(12, rng);
        std::vector<double> shifted;
        for (std::size_t p = 1; p <= 12; ++p) {
            const double c = shift(rng);
            for (double x : lp.row(p)) shifted.push_back(x + c);
        }
        const LogProbMatrix lp2(12, shifted);
        const auto v = folde::testing::random_variant(ref, 1 + std::size_t(t % 5), rng);
        EXPECT_NEAR(naturalness_score(v, lp2, ref), naturalness_score(v, lp, ref), 1e-12);
    }
}

TEST(Naturalness, TableMatchesScores) {
    std::mt19937_64 rng(4);
    const auto ref = folde::testing::random_sequence(6, rng);
    const auto lp = folde::testing::random_logprobs(6, rng);
    const auto singles = all_single_mutants(ref);
    const auto table = naturalness_table(singles, lp, ref);
    ASSERT_EQ(table.size(), singles.size());
    for (const auto& v : singles) EXPECT_EQ(table.at(v), naturalness_score(v, lp, ref));
}

TEST(AllSingles, CountAndOrder) {
    const auto s = all_single_mutants("ACD");
    ASSERT_EQ(s.size(), 57u);
    EXPECT_EQ(render(s.front()), "A1C");
    EXPECT_EQ(render(s.back()), "D3Y");
    for (const auto& v : s) EXPECT_EQ(v.size(), 1u);
}

TEST(ZeroShot, TopByScore) {
    LogitTable t("AAA");
    t.set(1, 'C', 0.9);
    t.set(2, 'C', 0.8);
    t.set(3, 'C', 0.7);
    const auto lp = t.matrix();
    const std::vector<Variant> c{parse_variant_text("A3C"), parse_variant_text("A1C"), parse_variant_text("A2C")};
    const auto out = zero_shot_select(c, lp, t.reference, 2);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(render(out[0]), "A1C");
    EXPECT_EQ(render(out[1]), "A2C");
}

TEST(ZeroShot, PerLocusCap) {
    LogitTable t("AAAAA");
    const std::string aas = "CDEFG";
    for (std::size_t i = 0; i < 5; ++i) t.set(3, aas[i], 0.9 - 0.1 * double(i));
    t.set(5, 'C', 0.4);
    const auto lp = t.matrix();
    std::vector<Variant> c;
    for (char aa : aas) c.push_back(Variant::single(3, 'A', aa));
    c.push_back(Variant::single(5, 'A', 'C'));
    const auto out = zero_shot_select(c, lp, t.reference, 4, 3);
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(render(out[0]), "A3C");
    EXPECT_EQ(render(out[1]), "A3D");
    EXPECT_EQ(render(out[2]), "A3E");
    EXPECT_EQ(render(out[3]), "A5C");
    // Without the cap the fourth pick stays at locus 3.
    EXPECT_EQ(render(zero_shot_select(c, lp, t.reference, 4)[3]), "A3F");
}

TEST(ZeroShot, TieBreakPositionThenResidue) {
    // Identical rows at positions 2 and 4 give bitwise-equal scores.
    LogitTable t("AAAAA");
    for (std::uint32_t p : {2u, 4u}) {
        t.set(p, 'W', 1.0);
        t.set(p, 'C', 1.0);
    }
    const auto lp = t.matrix();
    const std::vector<Variant> c{parse_variant_text("A4W"), parse_variant_text("A4C"), parse_variant_text("A2W"),
                                 parse_variant_text("A2C")};
    const auto out = zero_shot_select(c, lp, t.reference, 4);
    EXPECT_EQ(render(out[0]), "A2C");
    EXPECT_EQ(render(out[1]), "A2W");
    EXPECT_EQ(render(out[2]), "A4C");
    EXPECT_EQ(render(out[3]), "A4W");
}

TEST(ZeroShot, PermutationInvariant) {
    std::mt19937_64 rng(21);
    const auto ref = folde::testing::random_sequence(15, rng);
    const auto lp = folde::testing::random_logprobs(15, rng);
    auto cands = all_single_mutants(ref);
    for (int i = 0; i < 40; ++i) cands.push_back(folde::testing::random_variant(ref, 2, rng));
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (std::optional<std::size_t> cap : {std::optional<std::size_t>(), std::optional<std::size_t>(2)}) {
        const auto expected = zero_shot_select(cands, lp, ref, 16, cap);
        for (int k = 0; k < 10; ++k) {
            std::shuffle(cands.begin(), cands.end(), rng);
            EXPECT_EQ(zero_shot_select(cands, lp, ref, 16, cap), expected);
        }
    }
}

TEST(ZeroShot, Errors) {
    std::mt19937_64 rng(1);
    const auto lp = folde::testing::random_logprobs(3, rng);
    const std::vector<Variant> none;
    EXPECT_THROW(zero_shot_select(none, lp, "ACD", 0), InvariantError);
    const std::vector<Variant> one{parse_variant_text("A1C")};
    EXPECT_THROW(zero_shot_select(one, lp, "ACD", 2), InvariantError);
}

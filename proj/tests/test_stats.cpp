#include <gtest/gtest.h>

#include <random>

#include "folde/sim/forest.hpp"
#include "folde/sim/metrics.hpp"
#include "folde/sim/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace folde;

// ---- percentile and correlation ------------------------------------------------

TEST(Percentile, LinearInterpolation) {
    const std::vector<double> v{4, 1, 3, 2, 5};
    EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(percentile(v, 1.0), 5.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0.9), 4.6);
    const std::vector<double> two{0, 10};
    EXPECT_DOUBLE_EQ(percentile(two, 0.25), 2.5);
    EXPECT_THROW(percentile(std::vector<double>{}, 0.5), InvariantError);
    EXPECT_THROW(percentile(v, 1.5), InvariantError);
}

TEST(Spearman, Examples) {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> rev{5, 4, 3, 2, 1};
    const std::vector<double> swap{1, 2, 3, 5, 4};
    EXPECT_DOUBLE_EQ(spearman(a, a), 1.0);
    EXPECT_DOUBLE_EQ(spearman(a, rev), -1.0);
    EXPECT_NEAR(spearman(a, swap), 1.0 - 6.0 * 2.0 / (5.0 * 24.0), 1e-15);
    EXPECT_NEAR(spearman(a, swap), 0.9, 1e-15);
    const std::vector<double> flat{2, 2, 2, 2, 2};
    EXPECT_THROW(spearman(a, flat), NumericError);
    EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), InvariantError);
}

TEST(Spearman, TiesUseAverageRanks) {
    const std::vector<double> v{10, 20, 20, 30};
    EXPECT_EQ(average_ranks(v), (std::vector<double>{1, 2.5, 2.5, 4}));
    // Monotone transforms leave the coefficient unchanged.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> a(40), b(40), c(40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = g(rng);
        b[i] = a[i] + g(rng);
        c[i] = std::exp(3.0 * b[i]);
    }
    EXPECT_NEAR(spearman(a, b), spearman(a, c), 1e-12);
}

// ---- Wilcoxon -------------------------------------------------------------------

TEST(Wilcoxon, Examples) {
    const std::vector<double> pos{0.5, 1.0, 1.5, 2.0, 2.5};
    const auto r = wilcoxon_one_sided(pos);
    EXPECT_TRUE(r.exact);
    EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(r.statistic, 15.0);
    EXPECT_DOUBLE_EQ(wilcoxon_one_sided(std::vector<double>{0.3}).p_value, 0.5);
    EXPECT_DOUBLE_EQ(wilcoxon_one_sided(std::vector<double>{-0.3}).p_value, 1.0);
    EXPECT_THROW(wilcoxon_one_sided(std::vector<double>{0.0, 0.0}), InvariantError);
    const auto z = wilcoxon_one_sided(std::vector<double>{0.0, 2.0, 0.0});
    EXPECT_EQ(z.n, 1u);
    EXPECT_DOUBLE_EQ(z.p_value, 0.5);
}

TEST(Wilcoxon, MatchesEnumeration) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.3, 1.0);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng() % 10;
        std::vector<double> d(n);
        for (auto& x : d) {
            x = g(rng);
            if (t % 3 == 0) x = std::round(2.0 * x) / 2.0;  // ties and zeros
        }
        bool any = false;
        for (double x : d) any |= x != 0.0;
        if (!any) continue;
        EXPECT_NEAR(wilcoxon_one_sided(d).p_value, oracle::wilcoxon_enumerated(d), 1e-12);
    }
}

TEST(Wilcoxon, MirroredDifferencesSumToOnePlusPointMass) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> d(n), m(n);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = std::round(4.0 * g(rng)) / 4.0 + 0.125;  // nonzero, with ties
            m[i] = -d[i];
        }
        const double upper = oracle::wilcoxon_enumerated(d);
        const auto res = wilcoxon_one_sided(d);
        // P(W+ = observed), by enumeration over the same ranks.
        double point = 0.0;
        {
            std::vector<double> mags(n);
            for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(d[i]);
            const auto ranks = average_ranks(mags);
            std::size_t eq = 0;
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
                double w = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if (mask >> i & 1) w += ranks[i];
                eq += std::abs(w - res.statistic) < 1e-9;
            }
            point = double(eq) / double(std::uint64_t{1} << n);
        }
        EXPECT_NEAR(upper, res.p_value, 1e-12);
        EXPECT_NEAR(wilcoxon_one_sided(d).p_value + wilcoxon_one_sided(m).p_value, 1.0 + point, 1e-12);
    }
}

TEST(Wilcoxon, NormalApproximationAboveExactLimit) {
    // 30 distinct positive magnitudes, 20 positive: W+ from ranks 11..30.
    std::vector<double> d;
    for (int i = 1; i <= 30; ++i) d.push_back(i <= 10 ? -double(i) : double(i));
    const auto r = wilcoxon_one_sided(d);
    EXPECT_FALSE(r.exact);
    const double w = 20.0 * (11 + 30) / 2.0;
    EXPECT_DOUBLE_EQ(r.statistic, w);
    const double mean = 30.0 * 31.0 / 4.0, sd = std::sqrt(30.0 * 31.0 * 61.0 / 24.0);
    EXPECT_NEAR(r.p_value, 0.5 * std::erfc((w - 0.5 - mean) / sd / std::sqrt(2.0)), 1e-15);
    // Close to the exact distribution at the limit.
    std::vector<double> e(d.begin() + 5, d.end());
    ASSERT_EQ(e.size(), 25u);
    const auto exact = wilcoxon_one_sided(e);
    ASSERT_TRUE(exact.exact);
    std::vector<double> f = e;
    f.push_back(100.0);
    f.push_back(-0.5);
    const auto approx = wilcoxon_one_sided(f);
    EXPECT_FALSE(approx.exact);
    EXPECT_GT(approx.p_value, 0.0);
    EXPECT_LT(approx.p_value, 1.0);
}

// ---- metrics ----------------------------------------------------------------------

TEST(Difficulty, Examples) {
    // 161 points: 0..160 step, so the 99.375% point is exactly index 159.
    std::vector<double> a;
    for (int i = 0; i <= 160; ++i) a.push_back(double(i) / 16.0);
    EXPECT_NEAR(difficulty(a), 159.0 / 160.0, 1e-12);
    std::vector<double> spike(200, 0.0);
    spike.back() = 10.0;
    spike[198] = 10.0;
    spike[197] = 10.0;
    EXPECT_DOUBLE_EQ(difficulty(spike), 1.0);
    EXPECT_THROW(difficulty(std::vector<double>{1, 1, 1}), InvariantError);
    EXPECT_THROW(difficulty(std::vector<double>{1}), InvariantError);
}

TEST(Difficulty, ArithmeticExample) {
    // min 0, max 10 and a 99.375% point of 4: most mass at 4.
    std::vector<double> a(1000, 4.0);
    a[0] = 0.0;
    a[1] = 10.0;
    EXPECT_DOUBLE_EQ(difficulty(a), 0.4);
}

TEST(Difficulty, UniformSample) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(200000);
    for (auto& x : a) x = u(rng);
    EXPECT_NEAR(difficulty(a), 0.99375, 0.002);
}

namespace {

Dataset ladder(std::size_t n) {
    // Reference of n residues; record i is the single at position i+1 with activity i.
    const std::string ref(n, 'A');
    std::vector<Record> recs;
    for (std::size_t i = 0; i < n; ++i)
        recs.push_back({Variant({Mutation{std::uint32_t(i + 1), 'A', 'C'}}), double(i)});
    return Dataset(ref, std::move(recs));
}

Variant single(std::uint32_t pos, char to = 'C') { return Variant({Mutation{pos, 'A', to}}); }

}  // namespace

TEST(Hits, TopDecileAndPercentile) {
    const Dataset ds = ladder(100);  // activities 0..99
    const auto t = HitThresholds::of(ds);
    EXPECT_NEAR(t.top_decile, 89.1, 1e-12);
    EXPECT_NEAR(t.top_percentile, 98.01, 1e-12);
    std::vector<Variant> sel{single(100), single(91), single(90), single(1)};
    EXPECT_EQ(top_decile_hits(sel, ds), 2u);  // activities 99 and 90
    EXPECT_TRUE(top_percentile_success(sel, ds));
    sel.erase(sel.begin());
    EXPECT_FALSE(top_percentile_success(sel, ds));
    const std::vector<Variant> missing{single(5, 'D')};
    EXPECT_THROW(top_decile_hits(missing, ds), InvariantError);
}

TEST(Hits, RandomSelectionMatchesHypergeometric) {
    const Dataset ds = ladder(200);
    const auto acts = ds.activities();
    const double t = HitThresholds::of(ds).top_decile;
    const auto successes = std::size_t(std::count_if(acts.begin(), acts.end(), [&](double a) { return a >= t; }));
    std::mt19937_64 rng(8);
    std::vector<Variant> all;
    for (const auto& r : ds.records()) all.push_back(r.variant);
    double sum = 0, sq = 0;
    const int reps = 20000;
    for (int k = 0; k < reps; ++k) {
        std::shuffle(all.begin(), all.end(), rng);
        const double h = double(top_decile_hits(std::span<const Variant>(all.data(), 48), ds));
        sum += h;
        sq += h * h;
    }
    const double mean = sum / reps, var = sq / reps - mean * mean;
    EXPECT_NEAR(mean, oracle::hypergeometric_mean(200, successes, 48), 0.05);
    EXPECT_NEAR(var, oracle::hypergeometric_variance(200, successes, 48), 0.1);
}

TEST(Loci, Examples) {
    std::vector<Variant> distinct;
    for (std::uint32_t p = 1; p <= 16; ++p) distinct.push_back(single(p));
    EXPECT_EQ(batch_loci_diversity(distinct, {}), (LociDiversity{16, 16}));

    const std::string aas = "CDEFGHIKLMNPQRST";
    std::vector<Variant> one_site;
    for (char c : aas) one_site.push_back(single(3, c));
    EXPECT_EQ(batch_loci_diversity(one_site, {}), (LociDiversity{1, 1}));
    EXPECT_EQ(batch_loci_diversity(one_site, distinct), (LociDiversity{1, 0}));
}

TEST(Loci, DoublesWithFourNewLoci) {
    // History touched positions 1..8. The batch is 16 doubles: 28 of the 32
    // mutations reuse 1..8 and 4 land on new positions 20..23.
    std::vector<Variant> history;
    for (std::uint32_t p = 1; p <= 8; ++p) history.push_back(single(p));
    std::vector<Variant> batch;
    const std::string aas = "CDEFGHIKLMNPQRST";
    for (std::size_t i = 0; i < 16; ++i) {
        const std::uint32_t a = std::uint32_t(1 + i % 8);
        const std::uint32_t b = i < 4 ? std::uint32_t(20 + i) : std::uint32_t(1 + (i + 3) % 8);
        if (a == b) continue;
        batch.push_back(Variant({Mutation{a, 'A', aas[i]}, Mutation{b, 'A', aas[(i + 5) % 16]}}));
    }
    ASSERT_EQ(batch.size(), 16u);
    std::size_t mutations = 0, new_mutations = 0;
    for (const auto& v : batch)
        for (const auto& m : v.mutations()) {
            ++mutations;
            new_mutations += m.position >= 20;
        }
    ASSERT_EQ(mutations, 32u);
    ASSERT_EQ(new_mutations, 4u);
    EXPECT_EQ(batch_loci_diversity(batch, history).new_loci, 4u);
    EXPECT_EQ(batch_loci_diversity(batch, history).unique_loci, 12u);
}

// ---- random forest --------------------------------------------------------------------

TEST(Forest, ConstantLabels) {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g;
    Eigen::MatrixXf x(20, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const std::vector<double> y(20, 2.5);
    const auto f = rf_fit(x, y, ForestConfig{}, 3);
    const Eigen::VectorXd p = rf_predict(f, x);
    for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p(i), 2.5);
}

TEST(Forest, StepFunctionIsLearned) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(-1, 1);
    Eigen::MatrixXf x(100, 4);
    std::vector<double> y(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = u(rng);
        y[std::size_t(i)] = x(i, 2) > 0 ? 1.0 : 0.0;
    }
    ForestConfig cfg;
    cfg.n_trees = 50;
    const auto f = rf_fit(x, y, cfg, 4);
    Eigen::MatrixXf probe(2, 4);
    probe << 0, 0, 0.8, 0, 0, 0, -0.8, 0;
    const Eigen::VectorXd p = rf_predict(f, probe);
    EXPECT_GT(p(0), 0.8);
    EXPECT_LT(p(1), 0.2);
    for (Eigen::Index i = 0; i < 100; ++i) {
        const double pi = rf_predict(f, x.row(i))(0);
        EXPECT_GE(pi, 0.0);
        EXPECT_LE(pi, 1.0);
    }
}

TEST(Forest, SeedDeterministic) {
    std::mt19937_64 rng(6);
    std::normal_distribution<float> g;
    Eigen::MatrixXf x(30, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<double> y(30);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(x(Eigen::Index(i), 0));
    ForestConfig cfg;
    cfg.n_trees = 10;
    EXPECT_TRUE(rf_fit(x, y, cfg, 1) == rf_fit(x, y, cfg, 1));
    EXPECT_FALSE(rf_fit(x, y, cfg, 1) == rf_fit(x, y, cfg, 2));
    EXPECT_THROW(rf_fit(Eigen::MatrixXf(0, 5), {}, cfg, 1), InvariantError);
    EXPECT_THROW(rf_predict(rf_fit(x, y, cfg, 1), Eigen::MatrixXf::Zero(1, 4)), InvariantError);
}

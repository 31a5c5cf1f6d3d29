#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "broadrefine/errors.hpp"
#include "broadrefine/rewards.hpp"
#include "fixtures.hpp"

using namespace broadrefine;

namespace {

PerRewriteOutcome outcome(std::vector<ItemId> returned, const std::set<ItemId>& relevant) {
    PerRewriteOutcome o;
    o.returned = std::move(returned);
    for (ItemId id : o.returned) {
        if (relevant.count(id)) o.relevant.push_back(id);
    }
    return o;
}

}  // namespace

TEST(RelevanceRatio, Cases) {
    EXPECT_DOUBLE_EQ(relevance_ratio(outcome({1, 2, 3, 4, 5}, {1, 2, 3})), 0.6);
    EXPECT_EQ(relevance_ratio(outcome({}, {1})), 0.0);
    EXPECT_EQ(relevance_ratio(outcome({1, 2}, {1, 2})), 1.0);
}

TEST(IndependentContribution, HandExample) {
    std::set<ItemId> rel{2, 3, 4};
    std::vector<PerRewriteOutcome> os{outcome({1, 2, 3}, rel), outcome({3, 4}, rel)};
    assign_exclusive(os);
    EXPECT_EQ(os[0].exclusive_relevant, (std::vector<ItemId>{2}));
    EXPECT_EQ(os[1].exclusive_relevant, (std::vector<ItemId>{4}));
    auto p = independent_contribution(os);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(IndependentContribution, DisjointAndIdentical) {
    std::set<ItemId> rel{1, 2, 3, 4};
    std::vector<PerRewriteOutcome> disjoint{outcome({1, 2}, rel), outcome({3, 4}, rel)};
    for (double v : independent_contribution(disjoint)) EXPECT_EQ(v, 1.0);
    std::vector<PerRewriteOutcome> same{outcome({1, 2}, rel), outcome({1, 2}, rel)};
    for (double v : independent_contribution(same)) EXPECT_EQ(v, 0.0);
}

TEST(Hybrid, Cases) {
    EXPECT_DOUBLE_EQ(harmonic_term(0.6, 0.3), 0.4);
    EXPECT_DOUBLE_EQ(harmonic_term(0.7, 0.7), 0.7);
    EXPECT_EQ(harmonic_term(0.9, 0.0), 0.0);
    EXPECT_EQ(harmonic_term(0.0, 0.0), 0.0);
    // P_rel = 3/5, P_ic = 1/3 -> 2*(0.6/3)/(0.6+1/3) = 3/7
    std::set<ItemId> rel{1, 2, 3, 10};
    std::vector<PerRewriteOutcome> os{outcome({1, 2, 3, 4, 5}, rel), outcome({2, 3, 6}, rel)};
    auto a = hybrid_reward(os);
    EXPECT_NEAR(a, (3.0 / 7.0 + 0.0) / 2.0, 1e-15);
}

TEST(PoolRewards, Cases) {
    auto pool = fixture::make_pool({{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}, {1, 2, 3, 4, 5, 6});
    EXPECT_DOUBLE_EQ(global_reward(pool), 0.6);
    EXPECT_DOUBLE_EQ(effective_reward(pool), 0.6);
    auto dup = fixture::make_pool({{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 2, 3, 4, 5}}, {1, 2, 3, 4, 5, 6});
    EXPECT_DOUBLE_EQ(effective_reward(dup), 0.4);
    auto doubled = fixture::make_pool({{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
                                      {1, 2, 3, 4, 5, 6});
    EXPECT_DOUBLE_EQ(global_reward(doubled), global_reward(pool));
    EXPECT_DOUBLE_EQ(effective_reward(doubled), effective_reward(pool) / 2);
    CandidatePool empty;
    EXPECT_EQ(global_reward(empty), 0.0);
    EXPECT_EQ(effective_reward(empty), 0.0);
}

TEST(LowResultRate, Cases) {
    std::vector<std::size_t> c{0, 5, 20};
    EXPECT_DOUBLE_EQ(low_result_rate(c, 10), 2.0 / 3.0);
    std::vector<std::size_t> nonempty{1, 3, 8};
    EXPECT_EQ(low_result_rate(nonempty, 1), 0.0);
    EXPECT_THROW(low_result_rate(c, 0), ContractError);
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> v(1 + rng.below(30));
        for (auto& x : v) x = rng.below(25);
        double prev = 0;
        for (std::size_t t = 1; t < 30; ++t) {
            const double now = low_result_rate(v, t);
            EXPECT_LE(prev, now);
            prev = now;
        }
    }
}

TEST(Invariants, RandomOutcomes) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        auto r = fixture::random_outcome(rng);
        auto pool = fixture::make_pool(r.returned, r.relevant);
        auto rep = build_reward_report(pool);
        auto e = fixture::expected_metrics(r);
        ASSERT_EQ(rep.per_rewrite.size(), r.returned.size());
        for (std::size_t i = 0; i < r.returned.size(); ++i) {
            const auto& m = rep.per_rewrite[i];
            EXPECT_NEAR(m.relevance_ratio, e.p_rel[i], 1e-15);
            EXPECT_NEAR(m.independent_contribution, e.p_ic[i], 1e-15);
            EXPECT_LE(m.hybrid, std::max(m.relevance_ratio, m.independent_contribution) + 1e-15);
            EXPECT_GE(m.hybrid, std::min(m.relevance_ratio, m.independent_contribution) - 1e-15);
            EXPECT_LE(m.hybrid, std::sqrt(m.relevance_ratio * m.independent_contribution) + 1e-15);
        }
        EXPECT_NEAR(rep.hybrid, e.hybrid, 1e-12);
        EXPECT_NEAR(rep.global, e.global, 1e-15);
        EXPECT_NEAR(rep.effective, e.effective, 1e-15);
        for (double v : {rep.hybrid, rep.global, rep.effective}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_LE(rep.refined_count, rep.dedup_count);
        EXPECT_LE(rep.dedup_count, rep.pre_dedup_count);
        EXPECT_LE(rep.effective, rep.global);
        if (rep.dedup_count > 0) {
            EXPECT_NEAR(rep.effective, rep.global * double(rep.dedup_count) / double(rep.pre_dedup_count), 1e-12);
        }

        // rewrite order does not matter for the set-level metrics
        auto rev = r.returned;
        std::reverse(rev.begin(), rev.end());
        auto rep2 = build_reward_report(fixture::make_pool(rev, r.relevant));
        EXPECT_NEAR(rep2.hybrid, rep.hybrid, 1e-12);
        EXPECT_EQ(rep2.global, rep.global);
        EXPECT_EQ(rep2.effective, rep.effective);
    }
}

TEST(RewardMode, ParseAndSelect) {
    EXPECT_EQ(parse_reward_mode("hybrid"), RewardMode::Hybrid);
    EXPECT_EQ(parse_reward_mode("global"), RewardMode::Global);
    EXPECT_EQ(parse_reward_mode("effective"), RewardMode::Effective);
    EXPECT_THROW(parse_reward_mode("best"), ConfigError);
    RewardReport r;
    r.hybrid = 0.1;
    r.global = 0.2;
    r.effective = 0.3;
    EXPECT_EQ(select_reward(r, RewardMode::Global), 0.2);
    nlohmann::json j = r;
    EXPECT_EQ(j.at("r_eff"), 0.3);
}

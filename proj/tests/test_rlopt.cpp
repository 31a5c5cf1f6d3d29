#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "broadrefine/engine.hpp"
#include "broadrefine/errors.hpp"
#include "broadrefine/random.hpp"
#include "broadrefine/rlopt.hpp"
#include "fixtures.hpp"

using namespace broadrefine;

namespace {

Group group_with_rewards(std::vector<double> rewards) {
    Group g;
    for (double r : rewards) {
        Rollout ro;
        ro.reward = r;
        g.rollouts.push_back(ro);
    }
    return g;
}

}  // namespace

TEST(Advantages, SymmetricCase) {
    auto g = group_with_rewards({1, 0, 0, 1});
    compute_advantages(g, 2.0);
    EXPECT_FALSE(g.degenerate);
    EXPECT_EQ(g.advantages, (std::vector<double>{1, -1, -1, 1}));
}

TEST(Advantages, ConstantGroupExcluded) {
    auto g = group_with_rewards({0.3, 0.3, 0.3});
    compute_advantages(g, 2.0);
    EXPECT_TRUE(g.degenerate);
    auto lone = group_with_rewards({1});
    EXPECT_THROW(compute_advantages(lone, 2.0), ContractError);
}

TEST(Advantages, StandardizedAndClipped) {
    Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> r(2 + rng.below(10));
        for (auto& x : r) x = rng.bernoulli(0.3) ? std::round(rng.uniform()) : rng.uniform();
        auto a = standardize(r);
        if (a.empty()) continue;
        const double mean = std::accumulate(a.begin(), a.end(), 0.0) / double(a.size());
        double var = 0;
        for (double x : a) var += (x - mean) * (x - mean);
        EXPECT_LT(std::abs(mean), 1e-9);
        EXPECT_LT(std::abs(std::sqrt(var / double(a.size())) - 1), 1e-6);
    }
    auto g = group_with_rewards({1, 0, 0, 0, 0, 0, 0, 0});
    compute_advantages(g, 2.0);
    EXPECT_EQ(g.advantages[0], 2.0);
    EXPECT_NEAR(g.advantages[1], -1.0 / std::sqrt(7.0), 1e-12);
}

TEST(Advantages, BatchStandardization) {
    std::vector<Group> one{group_with_rewards({1, 0, 0.5, 0.2})};
    auto single = one.front();
    compute_advantages(single, 2.0);
    ASSERT_TRUE(compute_batch_advantages(one, 2.0));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(one[0].advantages[i], single.advantages[i], 1e-15);
    std::vector<Group> flat{group_with_rewards({0.5, 0.5}), group_with_rewards({0.5, 0.5})};
    EXPECT_FALSE(compute_batch_advantages(flat, 2.0));
}

TEST(Filters, Difficulty) {
    std::vector<Group> gs{group_with_rewards({0.05, 0.05}), group_with_rewards({0.5, 0.5}),
                          group_with_rewards({0.1, 0.1}), group_with_rewards({0.95, 0.95})};
    auto kept = difficulty_filter(gs, 0.1, 0.9);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].mean_reward(), 0.5);
    EXPECT_TRUE(difficulty_filter({gs[0]}, 0.1, 0.9).empty());
}

TEST(Filters, Equivalence) {
    auto q = fixture::query_with(2);
    auto make = [&](int distinct) {
        Group g;
        for (int i = 0; i < 8; ++i) {
            Rollout r;
            r.rewrites.rewrites = {RewriteSpec::from_mask(q, i < 8 - distinct ? 3u : static_cast<unsigned>(i % 3))};
            g.rollouts.push_back(r);
        }
        return g;
    };
    auto all_same = make(0);
    auto seven_same = make(1);
    auto kept = equivalence_filter({all_same, seven_same}, 8);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(equivalence_filter({seven_same}, 7).size(), 0u);
}

TEST(Objective, ClippedTermCases) {
    OptimizerConfig cfg;
    cfg.kl_coef = 0.0;
    auto q = fixture::query_with(1);
    auto make = [&](double p_old, double p_new, double adv) {
        auto old = PolicyParams::zeros(1, 1, 1.0);
        old.logits[0] = std::log(p_old / (1 - p_old));
        auto now = old;
        now.logits[0] = std::log(p_new / (1 - p_new));
        TokenRecord rec{1, 1, {1}, {}, 0};
        Group g;
        Rollout r;
        r.tokens = rec;
        g.rollouts.push_back(r);
        g.advantages = {adv};
        std::vector<Group> gs{g};
        return std::make_pair(grpo_objective(now, old, old, gs, cfg), gspo_objective(now, old, old, gs, cfg));
    };
    auto [a, a2] = make(0.4, 0.6, 1.0);
    EXPECT_NEAR(a.value, 1.2, 1e-12);
    EXPECT_EQ(a.gradient[0], 0.0);
    auto [b, b2] = make(0.8, 0.4, -1.0);
    EXPECT_NEAR(b.value, -0.8, 1e-12);
    // single-token sequences: the sequence ratio is the token ratio
    EXPECT_NEAR(a2.value, a.value, 1e-15);
    EXPECT_NEAR(b2.value, b.value, 1e-15);
    auto [c, c2] = make(0.5, 0.55, 1.0);
    EXPECT_NEAR(c.value, 1.1, 1e-12);
    EXPECT_NEAR(c2.gradient[0], c.gradient[0], 1e-15);
}

TEST(Objective, OnPolicyAgreement) {
    Rng rng(31);
    OptimizerConfig cfg;
    cfg.kl_coef = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        auto theta = fixture::random_params(2, 3, rng, 1.5);
        auto groups = fixture::synthetic_groups(theta, 3, 1, rng);
        if (groups[0].degenerate) continue;
        auto batch = groups;
        ASSERT_TRUE(compute_batch_advantages(batch, 2.0));
        auto g = grpo_objective(theta, theta, theta, groups, cfg);
        auto s = gspo_objective(theta, theta, theta, groups, cfg);
        auto r = reinforcepp_objective(theta, theta, theta, batch, cfg);
        EXPECT_NEAR(g.value, 0.0, 1e-12);
        EXPECT_NEAR(s.value, 0.0, 1e-12);
        EXPECT_NEAR(r.value, 0.0, 1e-12);
        // plain policy gradient: mean over rollouts of A * mean_t dlogpi
        std::vector<double> pg(theta.logits.size(), 0.0);
        const auto& grp = groups[0];
        for (std::size_t i = 0; i < grp.rollouts.size(); ++i) {
            const auto& tk = grp.rollouts[i].tokens;
            for (std::size_t t = 0; t < tk.size(); ++t) {
                const double p = 1 / (1 + std::exp(-theta.logits[t] / theta.temperature));
                pg[t] += grp.advantages[i] * (tk.decisions[t] - p) / theta.temperature / double(tk.size()) /
                         double(grp.rollouts.size());
            }
        }
        for (std::size_t k = 0; k < pg.size(); ++k) {
            EXPECT_NEAR(g.gradient[k], pg[k], 1e-12);
            EXPECT_NEAR(s.gradient[k], pg[k], 1e-12);
            EXPECT_NEAR(r.gradient[k], pg[k], 1e-12);
        }
    }
}

TEST(Objective, FiniteDifferenceGradients) {
    Rng rng(8);
    for (Algorithm algo : {Algorithm::Grpo, Algorithm::Gspo, Algorithm::ReinforcePP}) {
        OptimizerConfig cfg;
        cfg.algorithm = algo;
        cfg.kl_coef = 0.05;
        for (int trial = 0; trial < 10; ++trial) {
            auto old = fixture::random_params(2, 3, rng, 1.0);
            auto theta = old;
            for (auto& v : theta.logits) v += (rng.uniform() * 2 - 1) * 0.3;
            auto groups = fixture::synthetic_groups(old, 3, 3, rng);
            std::erase_if(groups, [](const Group& g) { return g.degenerate; });
            if (algo == Algorithm::ReinforcePP) compute_batch_advantages(groups, 2.0);
            auto ref = old;
            ref.logits = old.reference;
            EXPECT_LT(fixture::max_relative_error(theta, old, ref, groups, cfg), 1e-4) << to_string(algo) << " " << trial;
        }
    }
}

TEST(Objective, KlProperties) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = (rng.uniform() - 0.5) * 20;
        const double b = (rng.uniform() - 0.5) * 20;
        EXPECT_GE(bernoulli_kl(a, b, 0.99), 0.0);
        EXPECT_EQ(bernoulli_kl(a, a, 0.99), 0.0);
        if (std::abs(a - b) > 1e-3) EXPECT_GT(bernoulli_kl(a, b, 0.99), 0.0);
    }
}

TEST(Objective, ClippingIsElementwiseMin) {
    // every token contribution is at most both rho*A and clip(rho)*A
    Rng rng(5);
    OptimizerConfig cfg;
    cfg.kl_coef = 0.0;
    auto old = fixture::random_params(1, 1, rng, 1.0);
    for (int i = 0; i < 200; ++i) {
        auto theta = old;
        theta.logits[0] += (rng.uniform() - 0.5) * 4;
        for (int d = 0; d < 2; ++d) {
            const double adv = rng.uniform() * 4 - 2;
            TokenRecord rec{1, 1, {static_cast<std::uint8_t>(d)}, {}, 0};
            Group g;
            Rollout r;
            r.tokens = rec;
            g.rollouts.push_back(r);
            g.advantages = {adv};
            std::vector<Group> gs{g};
            const double v = grpo_objective(theta, old, old, gs, cfg).value;
            const double rho = std::exp(policy_log_prob(theta, rec) - policy_log_prob(old, rec));
            EXPECT_LE(v, rho * adv + 1e-12);
            EXPECT_LE(v, std::clamp(rho, 0.8, 1.2) * adv + 1e-12);
        }
    }
}

class SmallEnv : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        CatalogSpec spec;
        spec.num_items = 2000;
        spec.seed = 2;
        catalog_ = new Catalog(generate_catalog(spec));
        index_ = new Index(build_index(*catalog_));
        backend_ = new IndexBackend(*index_);
        std::vector<ParsedQuery> qs;
        for (const auto& r : build_query_benchmark(*catalog_, spec.schema, 30, 3, 4)) qs.push_back(parse(r.query_text));
        env_ = new RolloutEnvironment(*catalog_, *backend_, qs);
    }
    static void TearDownTestSuite() {
        delete env_;
        delete backend_;
        delete index_;
        delete catalog_;
    }
    static Catalog* catalog_;
    static Index* index_;
    static IndexBackend* backend_;
    static RolloutEnvironment* env_;
};

Catalog* SmallEnv::catalog_ = nullptr;
Index* SmallEnv::index_ = nullptr;
IndexBackend* SmallEnv::backend_ = nullptr;
RolloutEnvironment* SmallEnv::env_ = nullptr;

TEST_F(SmallEnv, RolloutDeterminismAndReplay) {
    OptimizerConfig cfg;
    EXPECT_EQ(cfg.group_size, 8u);
    auto params = PolicyParams::zeros(cfg.n_slots, env_->max_constraints());
    auto a = rollout_group(*env_, 3, params, cfg, 11);
    auto b = rollout_group(*env_, 3, params, cfg, 11);
    ASSERT_EQ(a.rollouts.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(a.rollouts[i].tokens, b.rollouts[i].tokens);
        EXPECT_EQ(a.rollouts[i].reward, b.rollouts[i].reward);
        auto replay = rewrites_from_tokens(env_->query(3), a.rollouts[i].tokens);
        EXPECT_EQ(select_reward(env_->evaluate(3, replay), cfg.reward_mode), a.rollouts[i].reward);
        EXPECT_GE(a.rollouts[i].reward, 0.0);
        EXPECT_LE(a.rollouts[i].reward, 1.0);
    }
}

TEST_F(SmallEnv, ZeroStepsIsNoOp) {
    OptimizerConfig cfg;
    cfg.steps = 0;
    auto init = PolicyParams::zeros(cfg.n_slots, env_->max_constraints());
    init.logits[0] = 0.7;
    auto res = train(*env_, cfg, &init);
    EXPECT_EQ(res.params, init);
    EXPECT_TRUE(res.curve.empty());
}

TEST_F(SmallEnv, TrainingIsDeterministic) {
    for (Algorithm algo : {Algorithm::Grpo, Algorithm::Gspo, Algorithm::ReinforcePP}) {
        OptimizerConfig cfg;
        cfg.algorithm = algo;
        cfg.steps = 6;
        cfg.rollout_batch = 10;
        cfg.seed = 17;
        std::vector<std::size_t> saved;
        auto a = train(*env_, cfg, nullptr, [&](std::size_t step, const PolicyParams&) { saved.push_back(step); });
        auto b = train(*env_, cfg);
        std::ostringstream ca, cb;
        write_curve_csv(ca, a.curve);
        write_curve_csv(cb, b.curve);
        EXPECT_EQ(ca.str(), cb.str());
        EXPECT_EQ(a.params, b.params);
        EXPECT_EQ(a.curve.size(), 6u);
        EXPECT_TRUE(saved.empty());
        cfg.checkpoint_every = 2;
        train(*env_, cfg, nullptr, [&](std::size_t step, const PolicyParams&) { saved.push_back(step); });
        EXPECT_EQ(saved, (std::vector<std::size_t>{2, 4, 6}));
    }
}

TEST_F(SmallEnv, Divergence) {
    OptimizerConfig cfg;
    cfg.steps = 5;
    cfg.learning_rate = 1e308;
    cfg.updates_per_step = 4;
    cfg.rollout_batch = 10;
    EXPECT_THROW(train(*env_, cfg), NumericError);
}

TEST(OptimizerConfig, Validation) {
    OptimizerConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.clip_eps, 0.2);
    EXPECT_EQ(cfg.advantage_clip, 2.0);
    EXPECT_EQ(cfg.rollout_batch, 64u);
    EXPECT_EQ(cfg.difficulty_lo, 0.1);
    EXPECT_EQ(cfg.difficulty_hi, 0.9);
    cfg.clip_eps = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.difficulty_lo = 0.9;
    cfg.difficulty_hi = 0.1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    nlohmann::json j = OptimizerConfig{};
    EXPECT_NO_THROW(j.get<OptimizerConfig>());
    j["unknown"] = 1;
    EXPECT_THROW(j.get<OptimizerConfig>(), ConfigError);
    EXPECT_THROW(parse_algorithm("ppo"), ConfigError);
}

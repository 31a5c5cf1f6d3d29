#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/engine.hpp"
#include "broadrefine/errors.hpp"
#include "broadrefine/expander.hpp"
#include "broadrefine/rewards.hpp"
#include "broadrefine/verifier.hpp"

namespace broadrefine {

enum class Algorithm { Grpo, Gspo, ReinforcePP };

Algorithm parse_algorithm(const std::string& name);  // throws ConfigError
std::string to_string(Algorithm algorithm);

struct OptimizerConfig {
    Algorithm algorithm = Algorithm::Grpo;
    RewardMode reward_mode = RewardMode::Effective;
    std::size_t group_size = 8;
    double clip_eps = 0.2;
    double kl_coef = 0.01;
    double advantage_clip = 2.0;
    double difficulty_lo = 0.1;
    double difficulty_hi = 0.9;
    std::size_t equivalence_cap = 0;  // 0 means group_size
    double learning_rate = 1e-2;
    std::size_t steps = 200;
    std::size_t rollout_batch = 64;
    std::size_t updates_per_step = 1;
    std::size_t n_slots = kDefaultRewriteCount;
    double temperature = kDefaultTemperature;
    std::size_t checkpoint_every = 0;
    std::uint64_t seed = 0;

    std::size_t effective_equivalence_cap() const { return equivalence_cap == 0 ? group_size : equivalence_cap; }
    void validate() const;  // throws ConfigError
};

// Benchmark queries plus engine and verifier: maps a rewrite set for a query
// to its page-0 broaden/refine reward report. Search results and verdicts
// are memoized, so instances are not safe for concurrent use.
class RolloutEnvironment {
public:
    RolloutEnvironment(const Catalog& catalog, const SearchBackend& engine, std::vector<ParsedQuery> queries,
                       UserContext user = {}, VerifierConfig verifier = {}, std::size_t limit = kDefaultResultLimit);

    std::size_t size() const { return queries_.size(); }
    const ParsedQuery& query(std::size_t i) const { return queries_.at(i); }
    std::size_t max_constraints() const;

    RewardReport evaluate(std::size_t query_index, const RewriteSet& rewrites) const;

    const Catalog& catalog() const { return *catalog_; }
    const SearchBackend& engine() const { return *engine_; }
    const UserContext& user() const { return user_; }
    const VerifierConfig& verifier() const { return verifier_; }
    std::size_t limit() const { return limit_; }

private:
    const Catalog* catalog_;
    const SearchBackend* engine_;
    std::vector<ParsedQuery> queries_;
    UserContext user_;
    VerifierConfig verifier_;
    std::size_t limit_;
    mutable std::vector<std::unordered_map<std::string, std::vector<ItemId>>> search_cache_;
    mutable std::vector<std::unordered_map<ItemId, bool>> verdict_cache_;
};

struct Rollout {
    TokenRecord tokens;  // decisions and old per-token log-probs
    RewriteSet rewrites;
    double reward = 0.0;
};

struct Group {
    std::size_t query_index = 0;
    std::vector<Rollout> rollouts;
    std::vector<double> advantages;  // one per rollout, shared by its tokens
    bool degenerate = false;

    double mean_reward() const;
};

Group rollout_group(const RolloutEnvironment& env, std::size_t query_index, const PolicyParams& old_params,
                    const OptimizerConfig& cfg, std::uint64_t seed);

// (R - mean) / std with population std; empty when std < 1e-8.
std::vector<double> standardize(std::span<const double> rewards);

// Group-relative advantages clipped to +-clip_bound; marks zero-variance
// groups degenerate.
void compute_advantages(Group& group, double clip_bound);

// Batch-wide standardization used by REINFORCE++. Returns false (and leaves
// the groups untouched) when the batch rewards have zero variance.
bool compute_batch_advantages(std::span<Group> groups, double clip_bound);

// Keeps groups whose mean raw reward lies strictly inside (lo, hi).
std::vector<Group> difficulty_filter(std::vector<Group> groups, double lo, double hi);

// Drops groups in which one rewrite-set output is repeated by >= cap rollouts.
std::vector<Group> equivalence_filter(std::vector<Group> groups, std::size_t cap);

struct ObjectiveResult {
    double value = 0.0;
    std::vector<double> gradient;  // d value / d theta.logits
};

// Exact per-decision KL(pi_theta || pi_ref) for one inclusion decision.
double bernoulli_kl(double logit, double reference_logit, double temperature);

// Clipped token-level surrogate with group-relative advantages minus
// beta * KL(pi_theta || pi_ref), averaged over groups.
ObjectiveResult grpo_objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                               std::span<const Group> groups, const OptimizerConfig& cfg);

// Sequence-level ratio exp(mean_t log rho_t), clipped once per rollout.
ObjectiveResult gspo_objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                               std::span<const Group> groups, const OptimizerConfig& cfg);

// Token-level clipped surrogate over the whole batch with batch-normalized
// advantages and the KL penalty folded into every token term.
ObjectiveResult reinforcepp_objective(const PolicyParams& theta, const PolicyParams& theta_old,
                                      const PolicyParams& theta_ref, std::span<const Group> groups,
                                      const OptimizerConfig& cfg);

ObjectiveResult objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                          std::span<const Group> groups, const OptimizerConfig& cfg);

struct CurvePoint {
    std::size_t step = 0;
    double mean_reward = 0.0;
    std::size_t kept_groups = 0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<CurvePoint> curve;
};

class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& message, PolicyParams last_good)
        : NumericError(message), last_good_(std::move(last_good)) {}
    const PolicyParams& last_good() const { return last_good_; }

private:
    PolicyParams last_good_;
};

using CheckpointFn = std::function<void(std::size_t step, const PolicyParams& params)>;

// Starts from zero logits (reference = initial params) unless `initial` is given.
TrainResult train(const RolloutEnvironment& env, const OptimizerConfig& cfg, const PolicyParams* initial = nullptr,
                  const CheckpointFn& checkpoint = {});

// Mean reward of `params` over every query, averaged over `samples` draws.
double evaluate_policy(const RolloutEnvironment& env, const PolicyParams& params, RewardMode mode,
                       std::size_t samples, std::uint64_t seed);

// Mean reward of a fixed expander over every query.
double evaluate_expander(const RolloutEnvironment& env, const Expander& expander, RewardMode mode);

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

void to_json(nlohmann::json& j, const OptimizerConfig& cfg);
void from_json(const nlohmann::json& j, OptimizerConfig& cfg);

}  // namespace broadrefine

#include "broadrefine/rlopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "broadrefine/pool.hpp"
#include "broadrefine/random.hpp"

namespace broadrefine {

Algorithm parse_algorithm(const std::string& name) {
    if (name == "grpo") return Algorithm::Grpo;
    if (name == "gspo") return Algorithm::Gspo;
    if (name == "reinforcepp") return Algorithm::ReinforcePP;
    throw ConfigError("optimizer must be grpo, gspo or reinforcepp, got '" + name + "'");
}

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::Grpo: return "grpo";
        case Algorithm::Gspo: return "gspo";
        case Algorithm::ReinforcePP: return "reinforcepp";
    }
    return {};
}

void OptimizerConfig::validate() const {
    if (group_size < 2) throw ConfigError("group_size must be at least 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
    if (!(kl_coef >= 0.0)) throw ConfigError("kl_coef must be non-negative");
    if (!(advantage_clip > 0.0)) throw ConfigError("advantage_clip must be positive");
    if (!(difficulty_lo < difficulty_hi)) throw ConfigError("difficulty interval needs lo < hi");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (rollout_batch == 0) throw ConfigError("rollout_batch must be at least 1");
    if (updates_per_step == 0) throw ConfigError("updates_per_step must be at least 1");
    if (n_slots == 0) throw ConfigError("n_slots must be at least 1");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

// ---------------------------------------------------------------------------
// Environment

RolloutEnvironment::RolloutEnvironment(const Catalog& catalog, const SearchBackend& engine,
                                       std::vector<ParsedQuery> queries, UserContext user, VerifierConfig verifier,
                                       std::size_t limit)
    : catalog_(&catalog),
      engine_(&engine),
      queries_(std::move(queries)),
      user_(std::move(user)),
      verifier_(verifier),
      limit_(limit),
      search_cache_(queries_.size()),
      verdict_cache_(queries_.size()) {}

std::size_t RolloutEnvironment::max_constraints() const {
    std::size_t m = 0;
    for (const auto& q : queries_) m = std::max(m, q.constraints.size());
    return m;
}

RewardReport RolloutEnvironment::evaluate(std::size_t query_index, const RewriteSet& rewrites) const {
    const auto& q = queries_.at(query_index);
    auto& searches = search_cache_[query_index];
    auto& verdicts = verdict_cache_[query_index];

    CandidatePool pool;
    pool.rewrite_count = rewrites.rewrites.size();
    for (std::size_t i = 0; i < rewrites.rewrites.size(); ++i) {
        const auto key = serialize(rewrites.rewrites[i]);
        auto it = searches.find(key);
        if (it == searches.end()) {
            it = searches.emplace(key, engine_->search({rewrites.rewrites[i], limit_, 0}).item_ids).first;
        }
        pool.add(i, it->second);
    }
    for (const ItemId id : pool.dedup) {
        auto it = verdicts.find(id);
        if (it == verdicts.end()) {
            it = verdicts.emplace(id, verify(q, catalog_->at(id), user_, verifier_).relevant).first;
        }
        if (it->second) pool.refined.push_back(id);
    }
    return build_reward_report(pool);
}

// ---------------------------------------------------------------------------
// Groups and advantages

double Group::mean_reward() const {
    if (rollouts.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : rollouts) total += r.reward;
    return total / static_cast<double>(rollouts.size());
}

Group rollout_group(const RolloutEnvironment& env, std::size_t query_index, const PolicyParams& old_params,
                    const OptimizerConfig& cfg, std::uint64_t seed) {
    Group group;
    group.query_index = query_index;
    const auto& q = env.query(query_index);
    for (std::size_t i = 0; i < cfg.group_size; ++i) {
        auto [rewrites, tokens] = policy_sample(old_params, q, mix_seed(seed, i));
        Rollout r;
        r.reward = select_reward(env.evaluate(query_index, rewrites), cfg.reward_mode);
        r.tokens = std::move(tokens);
        r.rewrites = std::move(rewrites);
        group.rollouts.push_back(std::move(r));
    }
    return group;
}

std::vector<double> standardize(std::span<const double> rewards) {
    if (rewards.empty()) return {};
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (const double r : rewards) var += (r - mean) * (r - mean);
    const double std = std::sqrt(var / n);
    if (std < 1e-8) return {};
    std::vector<double> out;
    out.reserve(rewards.size());
    for (const double r : rewards) out.push_back((r - mean) / std);
    return out;
}

namespace {

std::vector<double> rewards_of(const Group& group) {
    std::vector<double> out;
    for (const auto& r : group.rollouts) out.push_back(r.reward);
    return out;
}

void clip_all(std::vector<double>& values, double bound) {
    for (auto& v : values) v = std::clamp(v, -bound, bound);
}

}  // namespace

void compute_advantages(Group& group, double clip_bound) {
    if (group.rollouts.size() < 2) throw ContractError("advantages need a group of at least two rollouts");
    const auto rewards = rewards_of(group);
    auto adv = standardize(rewards);
    if (adv.empty()) {
        group.degenerate = true;
        group.advantages.assign(group.rollouts.size(), 0.0);
        return;
    }
    clip_all(adv, clip_bound);
    group.degenerate = false;
    group.advantages = std::move(adv);
}

bool compute_batch_advantages(std::span<Group> groups, double clip_bound) {
    std::vector<double> rewards;
    for (const auto& g : groups) {
        const auto r = rewards_of(g);
        rewards.insert(rewards.end(), r.begin(), r.end());
    }
    auto adv = standardize(rewards);
    if (adv.empty()) return false;
    clip_all(adv, clip_bound);
    std::size_t k = 0;
    for (auto& g : groups) {
        g.degenerate = false;
        g.advantages.assign(adv.begin() + static_cast<std::ptrdiff_t>(k),
                            adv.begin() + static_cast<std::ptrdiff_t>(k + g.rollouts.size()));
        k += g.rollouts.size();
    }
    return true;
}

std::vector<Group> difficulty_filter(std::vector<Group> groups, double lo, double hi) {
    std::erase_if(groups, [&](const Group& g) {
        const double m = g.mean_reward();
        return !(m > lo && m < hi);
    });
    return groups;
}

std::vector<Group> equivalence_filter(std::vector<Group> groups, std::size_t cap) {
    std::erase_if(groups, [&](const Group& g) {
        std::map<std::string, std::size_t> counts;
        for (const auto& r : g.rollouts) {
            // Rewrite-wise equivalence of two sets is equality of this key.
            std::string key;
            for (const auto& rw : r.rewrites.rewrites) key += serialize(rw) + '\n';
            if (++counts[key] >= cap) return true;
        }
        return false;
    });
    return groups;
}

// ---------------------------------------------------------------------------
// Objectives

double bernoulli_kl(double logit, double reference_logit, double temperature) {
    const double z = logit / temperature;
    const double zr = reference_logit / temperature;
    const double p = sigmoid(z);
    return p * (log_sigmoid(z) - log_sigmoid(zr)) + (1.0 - p) * (log_sigmoid(-z) - log_sigmoid(-zr));
}

namespace {

// d KL / d logit for one decision.
double bernoulli_kl_grad(double logit, double reference_logit, double temperature) {
    const double z = logit / temperature;
    const double zr = reference_logit / temperature;
    const double p = sigmoid(z);
    return p * (1.0 - p) * (z - zr) / temperature;
}

// d log pi(decision) / d logit.
double log_prob_grad(double logit, double temperature, bool include) {
    return ((include ? 1.0 : 0.0) - sigmoid(logit / temperature)) / temperature;
}

void check_finite(double v, const char* where, std::size_t group, std::size_t rollout) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite ") + where + " in group " + std::to_string(group) + ", rollout " +
                           std::to_string(rollout));
    }
}

void check_shapes(const PolicyParams& theta, const PolicyParams& other) {
    if (theta.n_slots != other.n_slots || theta.n_constraints != other.n_constraints ||
        theta.temperature != other.temperature) {
        throw ContractError("policy parameter shapes differ");
    }
}

// Adds -scale * KL over the active decisions of a query with m constraints
// (averaged over those decisions) to value and gradient.
double add_kl(const PolicyParams& theta, const PolicyParams& ref, std::size_t m, double scale,
              std::vector<double>& gradient) {
    const std::size_t count = theta.n_slots * m;
    if (count == 0) return 0.0;
    double kl = 0.0;
    for (std::size_t s = 0; s < theta.n_slots; ++s) {
        for (std::size_t j = 0; j < m; ++j) {
            const double a = theta.logit(s, j);
            const double b = ref.logit(s, j);
            kl += bernoulli_kl(a, b, theta.temperature);
            gradient[s * theta.n_constraints + j] -=
                scale * bernoulli_kl_grad(a, b, theta.temperature) / static_cast<double>(count);
        }
    }
    return scale * kl / static_cast<double>(count);
}

struct TokenTerm {
    double value;
    bool active;  // gradient flows through the unclipped ratio
};

TokenTerm clipped_term(double ratio, double advantage, double eps) {
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
    return unclipped <= clipped ? TokenTerm{unclipped, true} : TokenTerm{clipped, false};
}

void check_groups(std::span<const Group> groups) {
    for (const auto& g : groups) {
        if (g.advantages.size() != g.rollouts.size()) throw ContractError("group advantages are not computed");
    }
}

}  // namespace

ObjectiveResult grpo_objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                               std::span<const Group> groups, const OptimizerConfig& cfg) {
    check_shapes(theta, theta_old);
    check_shapes(theta, theta_ref);
    check_groups(groups);
    ObjectiveResult out;
    out.gradient.assign(theta.logits.size(), 0.0);
    if (groups.empty()) return out;
    const double group_weight = 1.0 / static_cast<double>(groups.size());

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        if (g.degenerate) throw ContractError("degenerate group passed to the objective");
        const double rollout_weight = group_weight / static_cast<double>(g.rollouts.size());
        for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
            const auto& tokens = g.rollouts[i].tokens;
            if (tokens.size() == 0) continue;
            const auto now = token_log_probs(theta, tokens);
            const auto old = token_log_probs(theta_old, tokens);
            const double weight = rollout_weight / static_cast<double>(tokens.size());
            const double adv = g.advantages[i];
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const double ratio = std::exp(now[t] - old[t]);
                check_finite(ratio, "importance ratio", gi, i);
                const auto term = clipped_term(ratio, adv, cfg.clip_eps);
                out.value += weight * term.value;
                if (term.active) {
                    const std::size_t s = t / tokens.n_constraints;
                    const std::size_t j = t % tokens.n_constraints;
                    out.gradient[s * theta.n_constraints + j] +=
                        weight * adv * ratio * log_prob_grad(theta.logit(s, j), theta.temperature, tokens.decisions[t] != 0);
                }
            }
        }
        const std::size_t m = g.rollouts.empty() ? 0 : g.rollouts.front().tokens.n_constraints;
        out.value -= add_kl(theta, theta_ref, m, group_weight * cfg.kl_coef, out.gradient);
    }
    check_finite(out.value, "objective", 0, 0);
    return out;
}

ObjectiveResult gspo_objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                               std::span<const Group> groups, const OptimizerConfig& cfg) {
    check_shapes(theta, theta_old);
    check_shapes(theta, theta_ref);
    check_groups(groups);
    ObjectiveResult out;
    out.gradient.assign(theta.logits.size(), 0.0);
    if (groups.empty()) return out;
    const double group_weight = 1.0 / static_cast<double>(groups.size());

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        if (g.degenerate) throw ContractError("degenerate group passed to the objective");
        const double rollout_weight = group_weight / static_cast<double>(g.rollouts.size());
        for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
            const auto& tokens = g.rollouts[i].tokens;
            if (tokens.size() == 0) continue;
            const auto now = token_log_probs(theta, tokens);
            const auto old = token_log_probs(theta_old, tokens);
            const double inv_len = 1.0 / static_cast<double>(tokens.size());
            double mean_log_ratio = 0.0;
            for (std::size_t t = 0; t < tokens.size(); ++t) mean_log_ratio += now[t] - old[t];
            mean_log_ratio *= inv_len;
            const double ratio = std::exp(mean_log_ratio);
            check_finite(ratio, "sequence importance ratio", gi, i);
            const double adv = g.advantages[i];
            const auto term = clipped_term(ratio, adv, cfg.clip_eps);
            out.value += rollout_weight * term.value;
            if (!term.active) continue;
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const std::size_t s = t / tokens.n_constraints;
                const std::size_t j = t % tokens.n_constraints;
                out.gradient[s * theta.n_constraints + j] += rollout_weight * adv * ratio * inv_len *
                                                             log_prob_grad(theta.logit(s, j), theta.temperature,
                                                                           tokens.decisions[t] != 0);
            }
        }
        const std::size_t m = g.rollouts.empty() ? 0 : g.rollouts.front().tokens.n_constraints;
        out.value -= add_kl(theta, theta_ref, m, group_weight * cfg.kl_coef, out.gradient);
    }
    check_finite(out.value, "objective", 0, 0);
    return out;
}

ObjectiveResult reinforcepp_objective(const PolicyParams& theta, const PolicyParams& theta_old,
                                      const PolicyParams& theta_ref, std::span<const Group> groups,
                                      const OptimizerConfig& cfg) {
    check_shapes(theta, theta_old);
    check_shapes(theta, theta_ref);
    check_groups(groups);
    ObjectiveResult out;
    out.gradient.assign(theta.logits.size(), 0.0);
    std::size_t total_rollouts = 0;
    for (const auto& g : groups) total_rollouts += g.rollouts.size();
    if (total_rollouts == 0) return out;
    const double rollout_weight = 1.0 / static_cast<double>(total_rollouts);
    const double temperature = theta.temperature;

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
            const auto& tokens = g.rollouts[i].tokens;
            if (tokens.size() == 0) continue;
            const auto now = token_log_probs(theta, tokens);
            const auto old = token_log_probs(theta_old, tokens);
            const double weight = rollout_weight / static_cast<double>(tokens.size());
            const double adv = g.advantages[i];
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const std::size_t s = t / tokens.n_constraints;
                const std::size_t j = t % tokens.n_constraints;
                const std::size_t flat = s * theta.n_constraints + j;
                const double ratio = std::exp(now[t] - old[t]);
                check_finite(ratio, "importance ratio", gi, i);
                const auto term = clipped_term(ratio, adv, cfg.clip_eps);
                const double kl = bernoulli_kl(theta.logit(s, j), theta_ref.logit(s, j), temperature);
                out.value += weight * (term.value - cfg.kl_coef * kl);
                double grad = -cfg.kl_coef * bernoulli_kl_grad(theta.logit(s, j), theta_ref.logit(s, j), temperature);
                if (term.active) {
                    grad += adv * ratio * log_prob_grad(theta.logit(s, j), temperature, tokens.decisions[t] != 0);
                }
                out.gradient[flat] += weight * grad;
            }
        }
    }
    check_finite(out.value, "objective", 0, 0);
    return out;
}

ObjectiveResult objective(const PolicyParams& theta, const PolicyParams& theta_old, const PolicyParams& theta_ref,
                          std::span<const Group> groups, const OptimizerConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::Grpo: return grpo_objective(theta, theta_old, theta_ref, groups, cfg);
        case Algorithm::Gspo: return gspo_objective(theta, theta_old, theta_ref, groups, cfg);
        case Algorithm::ReinforcePP: return reinforcepp_objective(theta, theta_old, theta_ref, groups, cfg);
    }
    throw ContractError("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Adam {
    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    // Gradient ascent step.
    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            params[i] += lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
        }
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;
};

std::vector<std::size_t> sample_batch(std::size_t population, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> out;
    if (population == 0) return out;
    if (batch >= population) {
        out.resize(population);
        std::iota(out.begin(), out.end(), 0);
        rng.shuffle(out);
        return out;
    }
    // Partial Fisher-Yates.
    std::vector<std::size_t> all(population);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < batch; ++i) {
        std::swap(all[i], all[i + rng.below(population - i)]);
    }
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(batch));
    return out;
}

}  // namespace

TrainResult train(const RolloutEnvironment& env, const OptimizerConfig& cfg, const PolicyParams* initial,
                  const CheckpointFn& checkpoint) {
    cfg.validate();
    TrainResult result;
    result.params = initial != nullptr ? *initial
                                       : PolicyParams::zeros(cfg.n_slots, env.max_constraints(), cfg.temperature);
    result.params.validate();
    PolicyParams reference = result.params;
    reference.logits = result.params.reference;
    Adam adam(result.params.logits.size());

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Rng rng(mix_seed(cfg.seed, step));
        const auto batch = sample_batch(env.size(), cfg.rollout_batch, rng);
        const PolicyParams old = result.params;

        std::vector<Group> groups;
        double reward_sum = 0.0;
        std::size_t reward_count = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            auto g = rollout_group(env, batch[b], old, cfg, mix_seed(mix_seed(cfg.seed, step), b + 1));
            for (const auto& r : g.rollouts) reward_sum += r.reward;
            reward_count += g.rollouts.size();
            groups.push_back(std::move(g));
        }

        groups = equivalence_filter(std::move(groups), cfg.effective_equivalence_cap());
        groups = difficulty_filter(std::move(groups), cfg.difficulty_lo, cfg.difficulty_hi);
        bool usable = !groups.empty();
        if (usable && cfg.algorithm == Algorithm::ReinforcePP) {
            usable = compute_batch_advantages(groups, cfg.advantage_clip);
        } else if (usable) {
            for (auto& g : groups) compute_advantages(g, cfg.advantage_clip);
            std::erase_if(groups, [](const Group& g) { return g.degenerate; });
            usable = !groups.empty();
        }

        if (usable) {
            for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
                const auto obj = objective(result.params, old, reference, groups, cfg);
                PolicyParams next = result.params;
                adam.step(next.logits, obj.gradient, cfg.learning_rate);
                for (std::size_t i = 0; i < next.logits.size(); ++i) {
                    if (!std::isfinite(next.logits[i])) {
                        throw TrainingDiverged("policy diverged at step " + std::to_string(step), result.params);
                    }
                }
                result.params = std::move(next);
            }
        }

        result.curve.push_back({step, reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0,
                                usable ? groups.size() : 0});
        if (checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
            checkpoint(step + 1, result.params);
        }
    }
    return result;
}

double evaluate_policy(const RolloutEnvironment& env, const PolicyParams& params, RewardMode mode,
                       std::size_t samples, std::uint64_t seed) {
    if (env.size() == 0 || samples == 0) return 0.0;
    double total = 0.0;
    for (std::size_t q = 0; q < env.size(); ++q) {
        for (std::size_t s = 0; s < samples; ++s) {
            const auto rewrites = policy_sample(params, env.query(q), mix_seed(mix_seed(seed, q), s)).first;
            total += select_reward(env.evaluate(q, rewrites), mode);
        }
    }
    return total / static_cast<double>(env.size() * samples);
}

double evaluate_expander(const RolloutEnvironment& env, const Expander& expander, RewardMode mode) {
    if (env.size() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t q = 0; q < env.size(); ++q) {
        total += select_reward(env.evaluate(q, expander.expand(env.query(q))), mode);
    }
    return total / static_cast<double>(env.size());
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "step,mean_reward,kept_groups\n";
    for (const auto& p : curve) {
        out << p.step << ',' << format_number(p.mean_reward) << ',' << p.kept_groups << '\n';
    }
}

void to_json(nlohmann::json& j, const OptimizerConfig& cfg) {
    j = nlohmann::json{{"algorithm", to_string(cfg.algorithm)},
                       {"reward_mode", to_string(cfg.reward_mode)},
                       {"group_size", cfg.group_size},
                       {"clip_eps", cfg.clip_eps},
                       {"kl_coef", cfg.kl_coef},
                       {"advantage_clip", cfg.advantage_clip},
                       {"difficulty", {cfg.difficulty_lo, cfg.difficulty_hi}},
                       {"equivalence_cap", cfg.equivalence_cap},
                       {"learning_rate", cfg.learning_rate},
                       {"steps", cfg.steps},
                       {"rollout_batch", cfg.rollout_batch},
                       {"updates_per_step", cfg.updates_per_step},
                       {"n_slots", cfg.n_slots},
                       {"temperature", cfg.temperature},
                       {"checkpoint_every", cfg.checkpoint_every},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& cfg) {
    cfg = OptimizerConfig{};
    for (const auto& [key, value] : j.items()) {
        if (key == "algorithm") cfg.algorithm = parse_algorithm(value.get<std::string>());
        else if (key == "reward_mode") cfg.reward_mode = parse_reward_mode(value.get<std::string>());
        else if (key == "group_size") cfg.group_size = value.get<std::size_t>();
        else if (key == "clip_eps") cfg.clip_eps = value.get<double>();
        else if (key == "kl_coef") cfg.kl_coef = value.get<double>();
        else if (key == "advantage_clip") cfg.advantage_clip = value.get<double>();
        else if (key == "difficulty") {
            cfg.difficulty_lo = value.at(0).get<double>();
            cfg.difficulty_hi = value.at(1).get<double>();
        }
        else if (key == "equivalence_cap") cfg.equivalence_cap = value.get<std::size_t>();
        else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
        else if (key == "steps") cfg.steps = value.get<std::size_t>();
        else if (key == "rollout_batch") cfg.rollout_batch = value.get<std::size_t>();
        else if (key == "updates_per_step") cfg.updates_per_step = value.get<std::size_t>();
        else if (key == "n_slots") cfg.n_slots = value.get<std::size_t>();
        else if (key == "temperature") cfg.temperature = value.get<double>();
        else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<std::size_t>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else throw ConfigError("unknown optimizer key '" + key + "'");
    }
    cfg.validate();
}

}  // namespace broadrefine

#include "broadrefine/rewards.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "broadrefine/errors.hpp"

namespace broadrefine {

RewardMode parse_reward_mode(const std::string& name) {
    if (name == "hybrid") return RewardMode::Hybrid;
    if (name == "global") return RewardMode::Global;
    if (name == "effective") return RewardMode::Effective;
    throw ConfigError("reward mode must be hybrid, global or effective, got '" + name + "'");
}

std::string to_string(RewardMode mode) {
    switch (mode) {
        case RewardMode::Hybrid: return "hybrid";
        case RewardMode::Global: return "global";
        case RewardMode::Effective: return "effective";
    }
    return {};
}

double relevance_ratio(const PerRewriteOutcome& outcome) {
    if (outcome.returned.empty()) return 0.0;
    return static_cast<double>(outcome.relevant.size()) / static_cast<double>(outcome.returned.size());
}

void assign_exclusive(std::span<PerRewriteOutcome> outcomes) {
    // Number of distinct rewrites that returned each item.
    std::unordered_map<ItemId, std::size_t> holders;
    for (const auto& o : outcomes) {
        std::unordered_set<ItemId> distinct(o.returned.begin(), o.returned.end());
        for (const ItemId id : distinct) ++holders[id];
    }
    for (auto& o : outcomes) {
        o.exclusive_relevant.clear();
        for (const ItemId id : o.relevant) {
            if (holders[id] == 1) o.exclusive_relevant.push_back(id);
        }
    }
}

std::vector<double> independent_contribution(std::span<const PerRewriteOutcome> outcomes) {
    std::vector<PerRewriteOutcome> copy(outcomes.begin(), outcomes.end());
    assign_exclusive(copy);
    std::vector<double> out;
    out.reserve(copy.size());
    for (const auto& o : copy) {
        out.push_back(o.relevant.empty() ? 0.0
                                         : static_cast<double>(o.exclusive_relevant.size()) /
                                               static_cast<double>(o.relevant.size()));
    }
    return out;
}

double harmonic_term(double p_rel, double p_ic) {
    const double sum = p_rel + p_ic;
    return sum > 0.0 ? 2.0 * p_rel * p_ic / sum : 0.0;
}

double hybrid_reward(std::span<const PerRewriteOutcome> outcomes) {
    if (outcomes.empty()) return 0.0;
    const auto p_ic = independent_contribution(outcomes);
    double total = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        total += harmonic_term(relevance_ratio(outcomes[i]), p_ic[i]);
    }
    return total / static_cast<double>(outcomes.size());
}

double global_reward(const CandidatePool& pool) {
    if (pool.dedup.empty()) return 0.0;
    return static_cast<double>(pool.refined.size()) / static_cast<double>(pool.dedup.size());
}

double effective_reward(const CandidatePool& pool) {
    if (pool.pre_dedup.empty()) return 0.0;
    return static_cast<double>(pool.refined.size()) / static_cast<double>(pool.pre_dedup.size());
}

double low_result_rate(std::span<const std::size_t> refined_counts, std::size_t threshold) {
    if (threshold == 0) throw ContractError("low-result threshold must be at least 1");
    if (refined_counts.empty()) return 0.0;
    const auto low = std::count_if(refined_counts.begin(), refined_counts.end(),
                                   [&](std::size_t c) { return c < threshold; });
    return static_cast<double>(low) / static_cast<double>(refined_counts.size());
}

std::vector<PerRewriteOutcome> outcomes_from_pool(const CandidatePool& pool) {
    const std::unordered_set<ItemId> relevant(pool.refined.begin(), pool.refined.end());
    std::vector<PerRewriteOutcome> outcomes(pool.rewrite_count);
    for (std::size_t i = 0; i < outcomes.size(); ++i) outcomes[i].index = i;
    for (const auto& entry : pool.pre_dedup) {
        if (entry.rewrite >= outcomes.size()) throw ContractError("pool provenance names an unknown rewrite");
        auto& o = outcomes[entry.rewrite];
        o.returned.push_back(entry.item_id);
        if (relevant.count(entry.item_id)) o.relevant.push_back(entry.item_id);
    }
    assign_exclusive(outcomes);
    return outcomes;
}

RewardReport build_reward_report(const CandidatePool& pool) {
    RewardReport report;
    const auto outcomes = outcomes_from_pool(pool);
    const auto p_ic = independent_contribution(outcomes);
    double hybrid_total = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        RewriteMetrics m;
        m.relevance_ratio = relevance_ratio(outcomes[i]);
        m.independent_contribution = p_ic[i];
        m.hybrid = harmonic_term(m.relevance_ratio, m.independent_contribution);
        hybrid_total += m.hybrid;
        report.per_rewrite.push_back(m);
    }
    report.hybrid = outcomes.empty() ? 0.0 : hybrid_total / static_cast<double>(outcomes.size());
    report.global = global_reward(pool);
    report.effective = effective_reward(pool);
    report.pre_dedup_count = pool.pre_dedup.size();
    report.dedup_count = pool.dedup.size();
    report.refined_count = pool.refined.size();
    return report;
}

double select_reward(const RewardReport& report, RewardMode mode) {
    switch (mode) {
        case RewardMode::Hybrid: return report.hybrid;
        case RewardMode::Global: return report.global;
        case RewardMode::Effective: return report.effective;
    }
    return 0.0;
}

void to_json(nlohmann::json& j, const RewardReport& report) {
    auto per = nlohmann::json::array();
    for (const auto& m : report.per_rewrite) {
        per.push_back({{"p_rel", m.relevance_ratio}, {"p_ic", m.independent_contribution}, {"hr", m.hybrid}});
    }
    j = nlohmann::json{{"per_rewrite", per},
                       {"r_hybrid", report.hybrid},
                       {"r_global", report.global},
                       {"r_eff", report.effective},
                       {"pre_dedup_count", report.pre_dedup_count},
                       {"dedup_count", report.dedup_count},
                       {"refined_count", report.refined_count}};
}

}  // namespace broadrefine

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/pool.hpp"

namespace broadrefine {

// What one rewrite returned, which of those items were judged relevant to
// the original query, and which relevant items no other rewrite returned.
struct PerRewriteOutcome {
    std::size_t index = 0;
    std::vector<ItemId> returned;
    std::vector<ItemId> relevant;
    std::vector<ItemId> exclusive_relevant;
};

struct RewriteMetrics {
    double relevance_ratio = 0.0;
    double independent_contribution = 0.0;
    double hybrid = 0.0;
};

struct RewardReport {
    std::vector<RewriteMetrics> per_rewrite;
    double hybrid = 0.0;
    double global = 0.0;
    double effective = 0.0;
    std::size_t pre_dedup_count = 0;
    std::size_t dedup_count = 0;
    std::size_t refined_count = 0;
};

enum class RewardMode { Hybrid, Global, Effective };

RewardMode parse_reward_mode(const std::string& name);  // throws ConfigError
std::string to_string(RewardMode mode);

// |I+| / |I|, zero for an empty result.
double relevance_ratio(const PerRewriteOutcome& outcome);

// Fills exclusive_relevant for every outcome.
void assign_exclusive(std::span<PerRewriteOutcome> outcomes);

// |I~+| / |I+| per rewrite (zero when nothing relevant). Exclusivity is
// recomputed from the returned sets, not read from the input.
std::vector<double> independent_contribution(std::span<const PerRewriteOutcome> outcomes);

double harmonic_term(double relevance_ratio, double independent_contribution);

// Mean over all n rewrites of the harmonic mean of P_rel and P_ic.
double hybrid_reward(std::span<const PerRewriteOutcome> outcomes);

// |I_r| / |I_b|.
double global_reward(const CandidatePool& pool);

// |I_r| / |I'_b|.
double effective_reward(const CandidatePool& pool);

double low_result_rate(std::span<const std::size_t> refined_counts, std::size_t threshold);

// Per-rewrite outcomes reconstructed from pool provenance and verdicts.
std::vector<PerRewriteOutcome> outcomes_from_pool(const CandidatePool& pool);

RewardReport build_reward_report(const CandidatePool& pool);

double select_reward(const RewardReport& report, RewardMode mode);

void to_json(nlohmann::json& j, const RewardReport& report);

}  // namespace broadrefine

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/engine.hpp"
#include "broadrefine/expander.hpp"
#include "broadrefine/pool.hpp"
#include "broadrefine/rewards.hpp"
#include "broadrefine/verifier.hpp"

namespace broadrefine {

struct PipelineConfig {
    std::size_t rewrites = kDefaultRewriteCount;
    std::size_t limit = kDefaultResultLimit;  // per-rewrite K
    std::size_t page_size = kDefaultResultLimit;
    double fill_ratio = 0.5;
    std::size_t max_refetch = 2;
    double smoothing = 1.0;
    RewardMode reward_mode = RewardMode::Effective;
    VerifierConfig verifier;
    std::size_t lrr_threshold = 10;
    std::size_t batch_size = 20;
    std::size_t verify_threads = 1;

    void validate() const;  // throws ConfigError
};

// Page-0 fan-out: each rewrite's first K results, concatenated in rewrite
// order and deduplicated by first occurrence.
CandidatePool broaden(const RewriteSet& rewrites, const SearchBackend& engine, std::size_t limit);
CandidatePool broaden(const ParsedQuery& q, const Expander& expander, const SearchBackend& engine,
                      const PipelineConfig& cfg);

// Verifies every deduplicated item against the original query and fills
// pool.judgments and pool.refined (pool order preserved).
void refine(CandidatePool& pool, const ParsedQuery& q, const UserContext& u, const Catalog& catalog,
            const VerifierConfig& cfg, std::size_t batch_size, BatchOptions options = {});

// Verified items credited to the rewrite that first contributed them.
std::vector<std::size_t> first_occurrence_contributions(const CandidatePool& pool);

// Laplace-smoothed proportional split of total_budget with largest-remainder
// rounding; every quota is at least 1 and the quotas sum to total_budget.
std::vector<std::size_t> allocate_budget(std::span<const std::size_t> contributions, std::size_t total_budget,
                                         double smoothing);

struct PageState {
    RewriteSet rewrites;
    CandidatePool pool;
    std::vector<std::size_t> cursors;  // next offset per rewrite
    std::vector<std::size_t> totals;   // total matches per rewrite
    std::vector<std::size_t> quotas;   // allocated once after page 0
    std::size_t refetch_count = 0;
    std::size_t engine_calls = 0;
};

struct PageResult {
    std::vector<ItemId> displayed;
    std::vector<Judgment> judgments;
    RewardReport report;
    std::size_t refetch_count = 0;
};

// Fetches page 0 for every rewrite and verifies it.
PageState start_page(const ParsedQuery& q, const RewriteSet& rewrites, const UserContext& u,
                     const PipelineConfig& cfg, const SearchBackend& engine, const Catalog& catalog);

// Tops up an under-filled page with further engine pages under the quotas,
// verifying only newly fetched items.
PageResult adaptive_page(const ParsedQuery& q, const UserContext& u, const PipelineConfig& cfg, PageState& state,
                         const SearchBackend& engine, const Catalog& catalog);

struct SessionReport {
    std::string query;
    std::vector<std::string> rewrites;
    RewardReport page0;  // rewards over the page-0 fan-out
    PageResult page;
    std::size_t pre_dedup_count = 0;  // final pool after any refetch
    std::size_t dedup_count = 0;
    std::size_t refined_count = 0;
    std::size_t engine_calls = 0;
    bool low_result = false;
};

SessionReport run_session(const ParsedQuery& q, const UserContext& u, const PipelineConfig& cfg,
                          const Expander& expander, const SearchBackend& engine, const Catalog& catalog);

void to_json(nlohmann::json& j, const SessionReport& report);
void from_json(const nlohmann::json& j, PipelineConfig& cfg);
void to_json(nlohmann::json& j, const PipelineConfig& cfg);

}  // namespace broadrefine

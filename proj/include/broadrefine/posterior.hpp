#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/engine.hpp"
#include "broadrefine/expander.hpp"
#include "broadrefine/querylang.hpp"
#include "broadrefine/verifier.hpp"

namespace broadrefine {

inline constexpr std::size_t kDefaultTopK = 4;

struct ScoredRewrite {
    RewriteSpec rewrite;
    std::string canonical;
    double score = 0.0;  // verified share of the returned items
    std::size_t returned_count = 0;
};

struct SftRecord {
    std::string query;
    std::vector<std::string> rewrites;
    std::vector<double> scores;
    std::string target;

    friend bool operator==(const SftRecord&, const SftRecord&) = default;
};

struct PosteriorConfig {
    std::size_t k = kDefaultTopK;
    std::size_t limit = kDefaultResultLimit;  // items fetched per candidate
    std::size_t candidate_cap = kDefaultCandidateCap;
    VerifierConfig verifier;
    UserContext user;
};

// Runs every candidate through the engine and scores it by the share of its
// results the verifier accepts for the ORIGINAL query.
std::vector<ScoredRewrite> score_candidates(const ParsedQuery& q, const std::vector<RewriteSpec>& candidates,
                                            const SearchBackend& engine, const Catalog& catalog,
                                            const VerifierConfig& cfg, const UserContext& u,
                                            std::size_t limit = kDefaultResultLimit);

// Orders by (score desc, returned_count desc, canonical asc), skips rewrites
// equivalent to an earlier pick, and keeps k.
std::vector<ScoredRewrite> select_topk(std::vector<ScoredRewrite> scored, std::size_t k);

SftRecord build_sft_record(const ParsedQuery& q, const SearchBackend& engine, const Catalog& catalog,
                           const PosteriorConfig& cfg);

// One record per benchmark query, in benchmark order.
std::vector<SftRecord> build_sft_dataset(const std::vector<QueryRecord>& benchmark, const SearchBackend& engine,
                                         const Catalog& catalog, const PosteriorConfig& cfg);

void to_json(nlohmann::json& j, const SftRecord& record);
void from_json(const nlohmann::json& j, SftRecord& record);
void write_sft_jsonl(std::ostream& out, const std::vector<SftRecord>& records);

}  // namespace broadrefine

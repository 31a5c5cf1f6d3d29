#include "broadrefine/posterior.hpp"

#include <algorithm>
#include <ostream>

#include "broadrefine/errors.hpp"

namespace broadrefine {

std::vector<ScoredRewrite> score_candidates(const ParsedQuery& q, const std::vector<RewriteSpec>& candidates,
                                            const SearchBackend& engine, const Catalog& catalog,
                                            const VerifierConfig& cfg, const UserContext& u, std::size_t limit) {
    if (candidates.empty()) throw ContractError("score_candidates needs at least one candidate");
    std::vector<ScoredRewrite> out;
    out.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        ScoredRewrite scored{candidate, serialize(candidate), 0.0, 0};
        const auto result = engine.search({candidate, limit, 0});
        scored.returned_count = result.item_ids.size();
        if (!result.item_ids.empty()) {
            std::size_t relevant = 0;
            for (const ItemId id : result.item_ids) {
                if (verify(q, catalog.at(id), u, cfg).relevant) ++relevant;
            }
            scored.score = static_cast<double>(relevant) / static_cast<double>(result.item_ids.size());
        }
        out.push_back(std::move(scored));
    }
    return out;
}

std::vector<ScoredRewrite> select_topk(std::vector<ScoredRewrite> scored, std::size_t k) {
    if (k == 0) throw ContractError("top-k needs k >= 1");
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredRewrite& a, const ScoredRewrite& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.returned_count != b.returned_count) return a.returned_count > b.returned_count;
        return a.canonical < b.canonical;
    });
    std::vector<ScoredRewrite> picked;
    for (auto& s : scored) {
        if (picked.size() == k) break;
        const bool duplicate = std::any_of(picked.begin(), picked.end(),
                                           [&](const ScoredRewrite& p) { return is_equivalent(p.rewrite, s.rewrite); });
        if (!duplicate) picked.push_back(std::move(s));
    }
    return picked;
}

SftRecord build_sft_record(const ParsedQuery& q, const SearchBackend& engine, const Catalog& catalog,
                           const PosteriorConfig& cfg) {
    const auto candidates = enumerate_candidates(q, cfg.candidate_cap);
    const auto top = select_topk(score_candidates(q, candidates, engine, catalog, cfg.verifier, cfg.user, cfg.limit), cfg.k);
    SftRecord record;
    record.query = serialize(q);
    for (const auto& s : top) {
        if (!record.target.empty()) record.target += " || ";
        record.target += s.canonical;
        record.rewrites.push_back(s.canonical);
        record.scores.push_back(s.score);
    }
    return record;
}

std::vector<SftRecord> build_sft_dataset(const std::vector<QueryRecord>& benchmark, const SearchBackend& engine,
                                         const Catalog& catalog, const PosteriorConfig& cfg) {
    if (benchmark.empty()) throw ContractError("cannot build SFT data from an empty benchmark");
    std::vector<SftRecord> out;
    out.reserve(benchmark.size());
    for (std::size_t i = 0; i < benchmark.size(); ++i) {
        try {
            out.push_back(build_sft_record(parse(benchmark[i].query_text), engine, catalog, cfg));
        } catch (const Error& e) {
            throw DataError("benchmark query " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

void to_json(nlohmann::json& j, const SftRecord& record) {
    j = nlohmann::json{
        {"query", record.query}, {"rewrites", record.rewrites}, {"scores", record.scores}, {"target", record.target}};
}

void from_json(const nlohmann::json& j, SftRecord& record) {
    record.query = j.at("query").get<std::string>();
    record.rewrites = j.at("rewrites").get<std::vector<std::string>>();
    record.scores = j.at("scores").get<std::vector<double>>();
    record.target = j.at("target").get<std::string>();
}

void write_sft_jsonl(std::ostream& out, const std::vector<SftRecord>& records) {
    for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

}  // namespace broadrefine

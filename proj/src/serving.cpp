#include "broadrefine/serving.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "broadrefine/errors.hpp"

namespace broadrefine {

void PipelineConfig::validate() const {
    if (rewrites == 0) throw ConfigError("pipeline.rewrites must be at least 1");
    if (limit == 0) throw ConfigError("pipeline.limit must be at least 1");
    if (page_size == 0 || page_size > rewrites * limit) {
        throw ConfigError("pipeline.page_size must lie in [1, rewrites * limit]");
    }
    if (!(fill_ratio > 0.0 && fill_ratio <= 1.0)) throw ConfigError("pipeline.fill_ratio must lie in (0, 1]");
    if (!(smoothing >= 0.0)) throw ConfigError("pipeline.smoothing must be non-negative");
    if (lrr_threshold == 0) throw ConfigError("pipeline.lrr_threshold must be at least 1");
    if (batch_size == 0) throw ConfigError("pipeline.batch_size must be at least 1");
    verifier.validate();
}

CandidatePool broaden(const RewriteSet& rewrites, const SearchBackend& engine, std::size_t limit) {
    CandidatePool pool;
    pool.rewrite_count = rewrites.rewrites.size();
    for (std::size_t i = 0; i < rewrites.rewrites.size(); ++i) {
        const auto result = engine.search({rewrites.rewrites[i], limit, 0});
        pool.add(i, result.item_ids);
    }
    return pool;
}

CandidatePool broaden(const ParsedQuery& q, const Expander& expander, const SearchBackend& engine,
                      const PipelineConfig& cfg) {
    const auto rewrites = expander.expand(q);
    if (rewrites.rewrites.empty()) throw ContractError("expander produced no rewrites");
    return broaden(rewrites, engine, cfg.limit);
}

namespace {

std::vector<const Item*> lookup(const Catalog& catalog, std::span<const ItemId> ids) {
    std::vector<const Item*> items;
    items.reserve(ids.size());
    for (const ItemId id : ids) items.push_back(&catalog.at(id));
    return items;
}

// Verifies pool.dedup[from..] and appends the verdicts.
void verify_tail(CandidatePool& pool, std::size_t from, const ParsedQuery& q, const UserContext& u,
                 const Catalog& catalog, const VerifierConfig& cfg, std::size_t batch_size, BatchOptions options) {
    const std::span<const ItemId> fresh(pool.dedup.data() + from, pool.dedup.size() - from);
    const auto items = lookup(catalog, fresh);
    auto judgments = batch_verify(q, items, u, cfg, batch_size, options);
    for (auto& j : judgments) {
        if (j.relevant) pool.refined.push_back(j.item_id);
        pool.judgments.push_back(std::move(j));
    }
}

}  // namespace

void refine(CandidatePool& pool, const ParsedQuery& q, const UserContext& u, const Catalog& catalog,
            const VerifierConfig& cfg, std::size_t batch_size, BatchOptions options) {
    pool.judgments.clear();
    pool.refined.clear();
    verify_tail(pool, 0, q, u, catalog, cfg, batch_size, options);
}

std::vector<std::size_t> first_occurrence_contributions(const CandidatePool& pool) {
    std::unordered_map<ItemId, std::size_t> source;
    for (std::size_t i = 0; i < pool.dedup.size(); ++i) source.emplace(pool.dedup[i], pool.first_source[i]);
    std::vector<std::size_t> out(pool.rewrite_count, 0);
    for (const ItemId id : pool.refined) ++out.at(source.at(id));
    return out;
}

std::vector<std::size_t> allocate_budget(std::span<const std::size_t> contributions, std::size_t total_budget,
                                         double smoothing) {
    const std::size_t n = contributions.size();
    if (n == 0) throw ContractError("budget allocation needs at least one rewrite");
    if (total_budget < n) throw ContractError("total budget must cover one item per rewrite");
    if (!(smoothing >= 0.0)) throw ContractError("smoothing must be non-negative");

    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = static_cast<double>(contributions[i]) + smoothing;
    double total_weight = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total_weight <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
        total_weight = static_cast<double>(n);
    }

    const double budget = static_cast<double>(total_budget);
    std::vector<std::size_t> quotas(n);
    std::vector<double> remainders(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = budget * weights[i] / total_weight;
        quotas[i] = static_cast<std::size_t>(std::floor(exact));
        remainders[i] = exact - std::floor(exact);
        assigned += quotas[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    // The floors sum to at most the budget; hand out the rest by remainder.
    for (std::size_t k = 0; assigned < total_budget; k = (k + 1) % n, ++assigned) ++quotas[order[k]];

    for (std::size_t i = 0; i < n; ++i) {
        if (quotas[i] > 0) continue;
        const auto donor = std::max_element(quotas.begin(), quotas.end());
        --*donor;
        quotas[i] = 1;
    }
    return quotas;
}

PageState start_page(const ParsedQuery& q, const RewriteSet& rewrites, const UserContext& u,
                     const PipelineConfig& cfg, const SearchBackend& engine, const Catalog& catalog) {
    if (rewrites.rewrites.empty()) throw ContractError("expander produced no rewrites");
    PageState state;
    state.rewrites = rewrites;
    state.pool.rewrite_count = rewrites.rewrites.size();
    for (std::size_t i = 0; i < rewrites.rewrites.size(); ++i) {
        const auto result = engine.search({rewrites.rewrites[i], cfg.limit, 0});
        ++state.engine_calls;
        state.pool.add(i, result.item_ids);
        state.cursors.push_back(result.item_ids.size());
        state.totals.push_back(result.total_matches);
    }
    refine(state.pool, q, u, catalog, cfg.verifier, cfg.batch_size, {cfg.verify_threads, nullptr});
    return state;
}

PageResult adaptive_page(const ParsedQuery& q, const UserContext& u, const PipelineConfig& cfg, PageState& state,
                         const SearchBackend& engine, const Catalog& catalog) {
    const std::size_t n = state.rewrites.rewrites.size();
    const double fill_target = cfg.fill_ratio * static_cast<double>(cfg.page_size);

    auto unexhausted = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            if (state.cursors[i] < state.totals[i]) return true;
        }
        return false;
    };

    while (static_cast<double>(std::min(state.pool.refined.size(), cfg.page_size)) < fill_target && unexhausted() &&
           state.refetch_count < cfg.max_refetch) {
        if (state.quotas.empty()) {
            state.quotas = allocate_budget(first_occurrence_contributions(state.pool), n * cfg.limit, cfg.smoothing);
        }
        const std::size_t before = state.pool.dedup.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (state.cursors[i] >= state.totals[i]) continue;
            const auto result = engine.search({state.rewrites.rewrites[i], state.quotas[i], state.cursors[i]});
            ++state.engine_calls;
            state.cursors[i] += result.item_ids.size();
            state.totals[i] = result.total_matches;
            state.pool.add(i, result.item_ids);
        }
        verify_tail(state.pool, before, q, u, catalog, cfg.verifier, cfg.batch_size, {cfg.verify_threads, nullptr});
        ++state.refetch_count;
    }

    PageResult page;
    const std::size_t shown = std::min(state.pool.refined.size(), cfg.page_size);
    page.displayed.assign(state.pool.refined.begin(), state.pool.refined.begin() + static_cast<std::ptrdiff_t>(shown));
    page.judgments = state.pool.judgments;
    page.report = build_reward_report(state.pool);
    page.refetch_count = state.refetch_count;
    return page;
}

SessionReport run_session(const ParsedQuery& q, const UserContext& u, const PipelineConfig& cfg,
                          const Expander& expander, const SearchBackend& engine, const Catalog& catalog) {
    SessionReport report;
    report.query = serialize(q);
    const auto rewrites = expander.expand(q);
    for (const auto& r : rewrites.rewrites) report.rewrites.push_back(serialize(r));

    PageState state = start_page(q, rewrites, u, cfg, engine, catalog);
    report.page0 = build_reward_report(state.pool);
    report.page = adaptive_page(q, u, cfg, state, engine, catalog);
    report.pre_dedup_count = state.pool.pre_dedup.size();
    report.dedup_count = state.pool.dedup.size();
    report.refined_count = state.pool.refined.size();
    report.engine_calls = state.engine_calls;
    report.low_result = report.refined_count < cfg.lrr_threshold;
    return report;
}

void to_json(nlohmann::json& j, const SessionReport& report) {
    j = nlohmann::json{{"query", report.query},
                       {"rewrites", report.rewrites},
                       {"counts",
                        {{"pre_dedup", report.pre_dedup_count},
                         {"dedup", report.dedup_count},
                         {"refined", report.refined_count}}},
                       {"rewards", report.page0},
                       {"final_rewards", report.page.report},
                       {"pages_fetched", 1 + report.page.refetch_count},
                       {"refetch_count", report.page.refetch_count},
                       {"engine_calls", report.engine_calls},
                       {"low_result", report.low_result},
                       {"displayed", report.page.displayed},
                       {"judgments", report.page.judgments}};
}

void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
    j = nlohmann::json{{"rewrites", cfg.rewrites},
                       {"limit", cfg.limit},
                       {"page_size", cfg.page_size},
                       {"fill_ratio", cfg.fill_ratio},
                       {"max_refetch", cfg.max_refetch},
                       {"smoothing", cfg.smoothing},
                       {"reward_mode", to_string(cfg.reward_mode)},
                       {"verifier", cfg.verifier},
                       {"lrr_threshold", cfg.lrr_threshold},
                       {"batch_size", cfg.batch_size},
                       {"verify_threads", cfg.verify_threads}};
}

void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
    cfg = PipelineConfig{};
    for (const auto& [key, value] : j.items()) {
        if (key == "rewrites") cfg.rewrites = value.get<std::size_t>();
        else if (key == "limit") cfg.limit = value.get<std::size_t>();
        else if (key == "page_size") cfg.page_size = value.get<std::size_t>();
        else if (key == "fill_ratio") cfg.fill_ratio = value.get<double>();
        else if (key == "max_refetch") cfg.max_refetch = value.get<std::size_t>();
        else if (key == "smoothing") cfg.smoothing = value.get<double>();
        else if (key == "reward_mode") cfg.reward_mode = parse_reward_mode(value.get<std::string>());
        else if (key == "verifier") cfg.verifier = value.get<VerifierConfig>();
        else if (key == "lrr_threshold") cfg.lrr_threshold = value.get<std::size_t>();
        else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
        else if (key == "verify_threads") cfg.verify_threads = value.get<std::size_t>();
        else throw ConfigError("unknown pipeline key '" + key + "'");
    }
    cfg.validate();
}

}  // namespace broadrefine

#include "broadrefine/expander.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <string>

#include "broadrefine/errors.hpp"
#include "broadrefine/random.hpp"

namespace broadrefine {

namespace {

std::uint64_t full_mask(std::size_t m) { return m == 64 ? ~0ULL : (1ULL << m) - 1; }

}  // namespace

std::vector<std::uint64_t> enumerate_candidate_masks(const ParsedQuery& q, std::size_t cap) {
    if (cap == 0) throw ContractError("candidate cap must be at least 1");
    const std::size_t m = q.constraints.size();
    if (m > 64) throw ContractError("at most 64 constraints per query are supported");

    std::vector<std::uint64_t> masks;
    const bool exhaustive = m < 64 && (1ULL << m) <= cap;
    if (exhaustive) {
        masks.resize(std::size_t{1} << m);
        for (std::uint64_t mask = 0; mask < masks.size(); ++mask) masks[mask] = mask;
    } else {
        const auto full = full_mask(m);
        std::set<std::uint64_t> chosen{full, 0};
        Rng rng(hash_string(serialize(q)));
        while (chosen.size() < cap) chosen.insert(rng.next() & full);
        masks.assign(chosen.begin(), chosen.end());
    }

    std::vector<std::pair<std::string, std::uint64_t>> keyed;
    keyed.reserve(masks.size());
    for (const auto mask : masks) keyed.emplace_back(serialize(RewriteSpec::from_mask(q, mask)), mask);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        const int pa = std::popcount(a.second);
        const int pb = std::popcount(b.second);
        if (pa != pb) return pa > pb;
        return a.first < b.first;
    });
    for (std::size_t i = 0; i < keyed.size(); ++i) masks[i] = keyed[i].second;
    return masks;
}

std::vector<RewriteSpec> enumerate_candidates(const ParsedQuery& q, std::size_t cap) {
    std::vector<RewriteSpec> out;
    for (const auto mask : enumerate_candidate_masks(q, cap)) out.push_back(RewriteSpec::from_mask(q, mask));
    return out;
}

RewriteSet expand_enumerative(const ParsedQuery& q, std::size_t n, std::size_t cap) {
    if (n == 0) throw ContractError("rewrite count must be at least 1");
    auto candidates = enumerate_candidates(q, cap);
    if (candidates.size() > n) candidates.resize(n);
    RewriteSet set;
    set.log_probs.assign(candidates.size(), 0.0);
    set.rewrites = std::move(candidates);
    return set;
}

PolicyParams PolicyParams::zeros(std::size_t n_slots, std::size_t n_constraints, double temperature) {
    PolicyParams p;
    p.n_slots = n_slots;
    p.n_constraints = n_constraints;
    p.temperature = temperature;
    p.logits.assign(n_slots * n_constraints, 0.0);
    p.reference = p.logits;
    return p;
}

void PolicyParams::validate() const {
    if (n_slots == 0) throw ContractError("policy needs at least one slot");
    if (logits.size() != n_slots * n_constraints || reference.size() != logits.size()) {
        throw ContractError("policy logits do not match shape " + std::to_string(n_slots) + "x" +
                            std::to_string(n_constraints));
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw NumericError("policy temperature must be positive");
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i]) || !std::isfinite(reference[i])) {
            throw NumericError("non-finite policy logit at slot " + std::to_string(i / std::max<std::size_t>(n_constraints, 1)) +
                               ", constraint " + std::to_string(i % std::max<std::size_t>(n_constraints, 1)));
        }
    }
}

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double decision_log_prob(double logit, double temperature, bool include) {
    const double z = logit / temperature;
    return include ? log_sigmoid(z) : log_sigmoid(-z);
}

namespace {

void check_shape(const PolicyParams& params, std::size_t m) {
    if (m > params.n_constraints) {
        throw ContractError("query has " + std::to_string(m) + " constraints but the policy covers " +
                            std::to_string(params.n_constraints));
    }
}

}  // namespace

std::pair<RewriteSet, TokenRecord> policy_sample(const PolicyParams& params, const ParsedQuery& q,
                                                 std::uint64_t seed) {
    params.validate();
    const std::size_t m = q.constraints.size();
    check_shape(params, m);

    Rng rng(seed);
    TokenRecord record;
    record.n_slots = params.n_slots;
    record.n_constraints = m;
    record.decisions.reserve(params.n_slots * m);
    record.log_probs.reserve(params.n_slots * m);
    for (std::size_t s = 0; s < params.n_slots; ++s) {
        for (std::size_t j = 0; j < m; ++j) {
            const double logit = params.logit(s, j);
            const bool include = rng.uniform() < sigmoid(logit / params.temperature);
            record.decisions.push_back(include ? 1 : 0);
            record.log_probs.push_back(decision_log_prob(logit, params.temperature, include));
        }
    }
    for (const double lp : record.log_probs) record.sequence_log_prob += lp;
    return {rewrites_from_tokens(q, record), std::move(record)};
}

std::vector<double> token_log_probs(const PolicyParams& params, const TokenRecord& record) {
    if (record.n_slots != params.n_slots || record.decisions.size() != record.n_slots * record.n_constraints) {
        throw ContractError("token record shape does not match policy");
    }
    check_shape(params, record.n_constraints);
    std::vector<double> out;
    out.reserve(record.decisions.size());
    for (std::size_t s = 0; s < record.n_slots; ++s) {
        for (std::size_t j = 0; j < record.n_constraints; ++j) {
            const bool include = record.decisions[s * record.n_constraints + j] != 0;
            out.push_back(decision_log_prob(params.logit(s, j), params.temperature, include));
        }
    }
    return out;
}

double policy_log_prob(const PolicyParams& params, const TokenRecord& record) {
    double total = 0.0;
    for (const double lp : token_log_probs(params, record)) total += lp;
    return total;
}

RewriteSet rewrites_from_tokens(const ParsedQuery& q, const TokenRecord& record) {
    if (record.n_constraints != q.constraints.size()) throw ContractError("token record does not match query");
    RewriteSet set;
    for (std::size_t s = 0; s < record.n_slots; ++s) {
        RewriteSpec r{q.core, {}};
        double lp = 0.0;
        for (std::size_t j = 0; j < record.n_constraints; ++j) {
            const std::size_t t = s * record.n_constraints + j;
            if (record.decisions[t]) r.constraints.push_back(q.constraints[j]);
            if (!record.log_probs.empty()) lp += record.log_probs[t];
        }
        set.rewrites.push_back(std::move(r));
        set.log_probs.push_back(lp);
    }
    return set;
}

RewriteSet IdentityExpander::expand(const ParsedQuery& q) const {
    return {{RewriteSpec::identity(q)}, {0.0}};
}

RewriteSet EnumerativeExpander::expand(const ParsedQuery& q) const { return expand_enumerative(q, n_, cap_); }

RewriteSet PolicyExpander::expand(const ParsedQuery& q) const {
    return policy_sample(params_, q, mix_seed(seed_, hash_string(serialize(q)))).first;
}

void to_json(nlohmann::json& j, const PolicyParams& params) {
    auto rows = [&](const std::vector<double>& flat) {
        auto out = nlohmann::json::array();
        for (std::size_t s = 0; s < params.n_slots; ++s) {
            out.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(s * params.n_constraints),
                                              flat.begin() + static_cast<std::ptrdiff_t>((s + 1) * params.n_constraints)));
        }
        return out;
    };
    j = nlohmann::json{{"n_slots", params.n_slots},
                       {"n_constraints", params.n_constraints},
                       {"temperature", params.temperature},
                       {"logits", rows(params.logits)},
                       {"reference", rows(params.reference)}};
}

void from_json(const nlohmann::json& j, PolicyParams& params) {
    params.n_slots = j.at("n_slots").get<std::size_t>();
    params.n_constraints = j.at("n_constraints").get<std::size_t>();
    params.temperature = j.at("temperature").get<double>();
    auto flatten = [&](const nlohmann::json& rows) {
        std::vector<double> flat;
        if (rows.size() != params.n_slots) throw ContractError("policy matrix has the wrong number of rows");
        for (const auto& row : rows) {
            auto values = row.get<std::vector<double>>();
            if (values.size() != params.n_constraints) throw ContractError("policy matrix row has the wrong length");
            flat.insert(flat.end(), values.begin(), values.end());
        }
        return flat;
    };
    params.logits = flatten(j.at("logits"));
    params.reference = j.contains("reference") ? flatten(j.at("reference")) : params.logits;
    params.validate();
}

}  // namespace broadrefine

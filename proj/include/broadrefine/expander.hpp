#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "broadrefine/querylang.hpp"

namespace broadrefine {

inline constexpr std::size_t kDefaultRewriteCount = 4;
inline constexpr std::size_t kDefaultCandidateCap = 4096;
inline constexpr double kDefaultTemperature = 0.99;

struct RewriteSet {
    std::vector<RewriteSpec> rewrites;
    // Per-rewrite log-probability under the generating policy; zero for
    // deterministic expanders.
    std::vector<double> log_probs;
};

// Constraint subsets (bit j keeps constraint j) ordered by size desc, then by
// canonical serialization. Exhaustive when 2^|A| <= cap; otherwise a sample
// of cap subsets seeded by the query text that always holds the full and
// empty sets.
std::vector<std::uint64_t> enumerate_candidate_masks(const ParsedQuery& q, std::size_t cap);
std::vector<RewriteSpec> enumerate_candidates(const ParsedQuery& q, std::size_t cap = kDefaultCandidateCap);

RewriteSet expand_enumerative(const ParsedQuery& q, std::size_t n, std::size_t cap = kDefaultCandidateCap);

// Factorized Bernoulli inclusion policy: slot s keeps constraint j with
// probability sigmoid(logits[s][j] / temperature). Columns past a query's
// |A| are inert.
struct PolicyParams {
    std::size_t n_slots = kDefaultRewriteCount;
    std::size_t n_constraints = 0;
    double temperature = kDefaultTemperature;
    std::vector<double> logits;     // row-major n_slots x n_constraints
    std::vector<double> reference;  // frozen reference copy, same shape

    static PolicyParams zeros(std::size_t n_slots, std::size_t n_constraints,
                              double temperature = kDefaultTemperature);

    double logit(std::size_t slot, std::size_t constraint) const { return logits[slot * n_constraints + constraint]; }
    double& logit(std::size_t slot, std::size_t constraint) { return logits[slot * n_constraints + constraint]; }
    double reference_logit(std::size_t slot, std::size_t constraint) const {
        return reference[slot * n_constraints + constraint];
    }

    void validate() const;  // NumericError on non-finite entries, ContractError on shape

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

// One rollout's binary decisions, slot-major: token t = s * m + j.
struct TokenRecord {
    std::size_t n_slots = 0;
    std::size_t n_constraints = 0;  // |A| of the query
    std::vector<std::uint8_t> decisions;
    std::vector<double> log_probs;
    double sequence_log_prob = 0.0;

    std::size_t size() const { return decisions.size(); }

    friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

double log_sigmoid(double z);
double sigmoid(double z);

// log pi(decision) for a single inclusion decision with the given logit.
double decision_log_prob(double logit, double temperature, bool include);

std::pair<RewriteSet, TokenRecord> policy_sample(const PolicyParams& params, const ParsedQuery& q,
                                                 std::uint64_t seed);

// Per-token log-probabilities of a recorded rollout under `params`.
std::vector<double> token_log_probs(const PolicyParams& params, const TokenRecord& record);
double policy_log_prob(const PolicyParams& params, const TokenRecord& record);

// Rewrites encoded by a token record.
RewriteSet rewrites_from_tokens(const ParsedQuery& q, const TokenRecord& record);

class Expander {
public:
    virtual ~Expander() = default;
    virtual RewriteSet expand(const ParsedQuery& q) const = 0;
};

class IdentityExpander final : public Expander {
public:
    RewriteSet expand(const ParsedQuery& q) const override;
};

class EnumerativeExpander final : public Expander {
public:
    explicit EnumerativeExpander(std::size_t n = kDefaultRewriteCount, std::size_t cap = kDefaultCandidateCap)
        : n_(n), cap_(cap) {}
    RewriteSet expand(const ParsedQuery& q) const override;

private:
    std::size_t n_;
    std::size_t cap_;
};

// Samples from a policy with a seed derived from (seed, query text).
class PolicyExpander final : public Expander {
public:
    PolicyExpander(PolicyParams params, std::uint64_t seed) : params_(std::move(params)), seed_(seed) {}
    RewriteSet expand(const ParsedQuery& q) const override;

private:
    PolicyParams params_;
    std::uint64_t seed_;
};

void to_json(nlohmann::json& j, const PolicyParams& params);
void from_json(const nlohmann::json& j, PolicyParams& params);

}  // namespace broadrefine

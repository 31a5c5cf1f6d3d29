#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/querylang.hpp"

namespace broadrefine {

// Items in this region are served everywhere.
inline constexpr std::string_view kNationwideRegion = "nationwide";

struct UserContext {
    std::string region;  // empty = no geolocation
    std::set<std::pair<std::string, std::string>> blocked_values;
};

struct Judgment {
    ItemId item_id = 0;
    bool relevant = false;
    std::string rationale;

    friend bool operator==(const Judgment&, const Judgment&) = default;
};

enum class VerifierMode { Oracle, Noisy };

struct VerifierConfig {
    VerifierMode mode = VerifierMode::Oracle;
    double precision = 0.87;
    double recall = 0.84;
    // Share of truly relevant pairs in the traffic the noise is calibrated for.
    double base_rate = 0.5;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Probability that a truly irrelevant pair is judged relevant so that the
// expected precision equals cfg.precision at cfg.base_rate.
double false_positive_rate(const VerifierConfig& cfg);

// Ground-truth judgment of `item` against the full original query and user.
Judgment oracle_verify(const ParsedQuery& q, const Item& item, const UserContext& u);

Judgment verify(const ParsedQuery& q, const Item& item, const UserContext& u, const VerifierConfig& cfg);

// Instrumentation for batch execution.
struct VerifyProbe {
    std::atomic<std::size_t> in_flight{0};
    std::atomic<std::size_t> peak_in_flight{0};
    std::atomic<std::size_t> calls{0};
    std::mutex mutex;
    std::vector<std::size_t> batch_sizes;
};

struct BatchOptions {
    std::size_t threads = 1;  // workers per batch
    VerifyProbe* probe = nullptr;
};

// Consecutive batches of at most batch_size run strictly one after another;
// items inside a batch may be judged concurrently. Output follows input order.
std::vector<Judgment> batch_verify(const ParsedQuery& q, std::span<const Item* const> items, const UserContext& u,
                                   const VerifierConfig& cfg, std::size_t batch_size, BatchOptions options = {});

void to_json(nlohmann::json& j, const Judgment& judgment);
void to_json(nlohmann::json& j, const UserContext& u);
void from_json(const nlohmann::json& j, UserContext& u);
void to_json(nlohmann::json& j, const VerifierConfig& cfg);
void from_json(const nlohmann::json& j, VerifierConfig& cfg);

}  // namespace broadrefine

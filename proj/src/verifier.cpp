#include "broadrefine/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "broadrefine/errors.hpp"
#include "broadrefine/random.hpp"

namespace broadrefine {

namespace {

bool region_compatible(const Item& item, const UserContext& u) {
    return u.region.empty() || item.region.empty() || item.region == kNationwideRegion || item.region == u.region;
}

// Returns an empty string when the constraint holds.
std::string check(const Constraint& c, const Item& item, const std::set<std::string>& descriptors) {
    switch (c.kind) {
        case ConstraintKind::HardEquality: {
            const auto it = item.attributes.find(c.key);
            if (it == item.attributes.end() || it->second != c.value) return "violates " + serialize(c);
            return {};
        }
        case ConstraintKind::NumericRange: {
            const auto it = item.numeric.find(c.key);
            if (it == item.numeric.end() || it->second < c.lo || it->second > c.hi) return "violates " + serialize(c);
            return {};
        }
        case ConstraintKind::Negation: {
            const auto it = item.attributes.find(c.key);
            if (it != item.attributes.end() && it->second == c.value) return "violates " + serialize(c);
            return {};
        }
        case ConstraintKind::SoftDescriptor:
            if (!descriptors.count(c.value)) return "lacks " + serialize(c);
            return {};
    }
    return {};
}

std::uint64_t query_hash(const VerifierConfig& cfg, const ParsedQuery& q) {
    return mix_seed(cfg.seed, hash_string(serialize(q)));
}

Judgment apply_noise(Judgment truth, const VerifierConfig& cfg, std::uint64_t qhash) {
    if (cfg.mode == VerifierMode::Oracle) return truth;
    const double u = to_unit(mix_seed(qhash, truth.item_id));
    if (truth.relevant) {
        if (u < 1.0 - cfg.recall) {
            truth.relevant = false;
            truth.rationale = "judged irrelevant despite: " + truth.rationale;
        }
    } else if (u < false_positive_rate(cfg)) {
        truth.relevant = true;
        truth.rationale = "judged relevant despite: " + truth.rationale;
    }
    return truth;
}

}  // namespace

void VerifierConfig::validate() const {
    if (mode == VerifierMode::Oracle) return;
    if (!(precision > 0.0 && precision <= 1.0)) throw ConfigError("verifier precision must lie in (0, 1]");
    if (!(recall > 0.0 && recall <= 1.0)) throw ConfigError("verifier recall must lie in (0, 1]");
    if (!(base_rate > 0.0 && base_rate < 1.0)) throw ConfigError("verifier base_rate must lie in (0, 1)");
}

double false_positive_rate(const VerifierConfig& cfg) {
    const double fp = cfg.base_rate * cfg.recall * (1.0 - cfg.precision) / (cfg.precision * (1.0 - cfg.base_rate));
    return std::clamp(fp, 0.0, 1.0);
}

Judgment oracle_verify(const ParsedQuery& q, const Item& item, const UserContext& u) {
    Judgment j{item.id, false, {}};
    if (item.category != q.core) {
        j.rationale = "category " + item.category + " is not " + q.core;
        return j;
    }
    const auto descriptors = item_descriptors(item);
    for (const auto& c : q.constraints) {
        if (auto why = check(c, item, descriptors); !why.empty()) {
            j.rationale = std::move(why);
            return j;
        }
    }
    if (!region_compatible(item, u)) {
        j.rationale = "not available in region " + u.region;
        return j;
    }
    for (const auto& [key, value] : u.blocked_values) {
        const auto it = item.attributes.find(key);
        if (it != item.attributes.end() && it->second == value) {
            j.rationale = "user excludes " + key + "=" + value;
            return j;
        }
    }
    j.relevant = true;
    j.rationale = "all constraints satisfied";
    return j;
}

Judgment verify(const ParsedQuery& q, const Item& item, const UserContext& u, const VerifierConfig& cfg) {
    auto truth = oracle_verify(q, item, u);
    if (cfg.mode == VerifierMode::Oracle) return truth;
    return apply_noise(std::move(truth), cfg, query_hash(cfg, q));
}

std::vector<Judgment> batch_verify(const ParsedQuery& q, std::span<const Item* const> items, const UserContext& u,
                                   const VerifierConfig& cfg, std::size_t batch_size, BatchOptions options) {
    if (batch_size == 0) throw ContractError("batch_size must be at least 1");
    const std::uint64_t qhash = cfg.mode == VerifierMode::Oracle ? 0 : query_hash(cfg, q);
    std::vector<Judgment> out(items.size());
    VerifyProbe* probe = options.probe;

    auto judge = [&](std::size_t i) {
        if (probe != nullptr) {
            const auto now = probe->in_flight.fetch_add(1) + 1;
            auto peak = probe->peak_in_flight.load();
            while (now > peak && !probe->peak_in_flight.compare_exchange_weak(peak, now)) {
            }
            probe->calls.fetch_add(1);
        }
        out[i] = apply_noise(oracle_verify(q, *items[i], u), cfg, qhash);
        if (probe != nullptr) probe->in_flight.fetch_sub(1);
    };

    for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
        const std::size_t end = std::min(items.size(), begin + batch_size);
        if (probe != nullptr) {
            std::lock_guard lock(probe->mutex);
            probe->batch_sizes.push_back(end - begin);
        }
        const std::size_t workers = std::min(std::max<std::size_t>(options.threads, 1), end - begin);
        if (workers == 1) {
            for (std::size_t i = begin; i < end; ++i) judge(i);
            continue;
        }
        std::atomic<std::size_t> next{begin};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < end; i = next.fetch_add(1)) judge(i);
            });
        }
        // jthreads join here, before the next batch starts.
    }
    return out;
}

void to_json(nlohmann::json& j, const Judgment& judgment) {
    j = nlohmann::json{{"item_id", judgment.item_id},
                       {"label", judgment.relevant ? "relevant" : "irrelevant"},
                       {"rationale", judgment.rationale}};
}

void to_json(nlohmann::json& j, const UserContext& u) {
    auto blocked = nlohmann::json::array();
    for (const auto& [key, value] : u.blocked_values) blocked.push_back({key, value});
    j = nlohmann::json{{"region", u.region}, {"blocked_values", blocked}};
}

void from_json(const nlohmann::json& j, UserContext& u) {
    u = UserContext{};
    u.region = j.value("region", std::string{});
    for (const auto& b : j.value("blocked_values", nlohmann::json::array())) {
        u.blocked_values.emplace(b.at(0).get<std::string>(), b.at(1).get<std::string>());
    }
}

void to_json(nlohmann::json& j, const VerifierConfig& cfg) {
    j = nlohmann::json{{"mode", cfg.mode == VerifierMode::Oracle ? "oracle" : "noisy"},
                       {"precision", cfg.precision},
                       {"recall", cfg.recall},
                       {"base_rate", cfg.base_rate},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, VerifierConfig& cfg) {
    cfg = VerifierConfig{};
    for (const auto& [key, value] : j.items()) {
        if (key == "mode") {
            const auto mode = value.get<std::string>();
            if (mode == "oracle") {
                cfg.mode = VerifierMode::Oracle;
            } else if (mode == "noisy") {
                cfg.mode = VerifierMode::Noisy;
            } else {
                throw ConfigError("verifier.mode must be 'oracle' or 'noisy', got '" + mode + "'");
            }
        } else if (key == "precision") {
            cfg.precision = value.get<double>();
        } else if (key == "recall") {
            cfg.recall = value.get<double>();
        } else if (key == "base_rate") {
            cfg.base_rate = value.get<double>();
        } else if (key == "seed") {
            cfg.seed = value.get<std::uint64_t>();
        } else {
            throw ConfigError("unknown verifier key '" + key + "'");
        }
    }
    cfg.validate();
}

}  // namespace broadrefine

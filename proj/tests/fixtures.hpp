#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <set>
#include <vector>

#include "broadrefine/catalog.hpp"
#include "broadrefine/pool.hpp"
#include "broadrefine/random.hpp"
#include "broadrefine/rlopt.hpp"

namespace fixture {

using namespace broadrefine;

// Pool from per-rewrite result lists, with `relevant` deciding refinement.
inline broadrefine::CandidatePool make_pool(const std::vector<std::vector<ItemId>>& returned,
                                            const std::set<ItemId>& relevant) {
    broadrefine::CandidatePool pool;
    pool.rewrite_count = returned.size();
    for (std::size_t i = 0; i < returned.size(); ++i) pool.add(i, returned[i]);
    for (ItemId id : pool.dedup) {
        pool.judgments.push_back({id, relevant.count(id) != 0, relevant.count(id) ? "ok" : "no"});
        if (relevant.count(id)) pool.refined.push_back(id);
    }
    return pool;
}

struct RandomOutcome {
    std::vector<std::vector<ItemId>> returned;
    std::set<ItemId> relevant;
};

// Up to 5 rewrites, each returning up to 20 distinct ids from a small
// universe so overlaps are common.
inline RandomOutcome random_outcome(broadrefine::Rng& rng) {
    RandomOutcome out;
    const std::size_t n = 1 + rng.below(5);
    const std::uint64_t universe = 5 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<ItemId> ids;
        const std::size_t k = rng.below(21);
        while (ids.size() < std::min<std::uint64_t>(k, universe)) ids.insert(rng.below(universe));
        std::vector<ItemId> list(ids.begin(), ids.end());
        rng.shuffle(list);
        out.returned.push_back(list);
    }
    const double p = rng.uniform();
    for (ItemId id = 0; id < universe; ++id) {
        if (rng.bernoulli(p)) out.relevant.insert(id);
    }
    return out;
}

// Straight from the set definitions.
struct Expected {
    std::vector<double> p_rel, p_ic;
    double hybrid = 0, global = 0, effective = 0;
};

inline Expected expected_metrics(const RandomOutcome& r) {
    Expected e;
    std::set<ItemId> union_set;
    std::size_t pre = 0;
    for (const auto& ids : r.returned) {
        pre += ids.size();
        union_set.insert(ids.begin(), ids.end());
    }
    double hsum = 0;
    for (std::size_t i = 0; i < r.returned.size(); ++i) {
        std::size_t rel = 0, excl = 0;
        for (ItemId id : r.returned[i]) {
            if (!r.relevant.count(id)) continue;
            ++rel;
            bool elsewhere = false;
            for (std::size_t j = 0; j < r.returned.size(); ++j) {
                if (j != i && std::count(r.returned[j].begin(), r.returned[j].end(), id)) elsewhere = true;
            }
            if (!elsewhere) ++excl;
        }
        const double pr = r.returned[i].empty() ? 0.0 : double(rel) / double(r.returned[i].size());
        const double pc = rel == 0 ? 0.0 : double(excl) / double(rel);
        e.p_rel.push_back(pr);
        e.p_ic.push_back(pc);
        hsum += (pr + pc) == 0 ? 0.0 : 2 * pr * pc / (pr + pc);
    }
    e.hybrid = hsum / double(r.returned.size());
    std::size_t refined = 0;
    for (ItemId id : union_set) refined += r.relevant.count(id);
    e.global = union_set.empty() ? 0.0 : double(refined) / double(union_set.size());
    e.effective = pre == 0 ? 0.0 : double(refined) / double(pre);
    return e;
}

inline broadrefine::ParsedQuery query_with(std::size_t m) {
    ParsedQuery q{"bag", {}};
    for (std::size_t j = 0; j < m; ++j) q.constraints.push_back(Constraint::hard("k" + std::to_string(j), "v"));
    return q;
}

// Groups of sampled rollouts with synthetic rewards.
inline std::vector<broadrefine::Group> synthetic_groups(const PolicyParams& old, std::size_t m, std::size_t count, Rng& rng) {
    std::vector<Group> out;
    auto q = query_with(m);
    for (std::size_t g = 0; g < count; ++g) {
        Group group;
        for (std::size_t i = 0; i < 6; ++i) {
            auto [set, rec] = policy_sample(old, q, rng.next());
            Rollout r;
            r.tokens = rec;
            r.rewrites = set;
            r.reward = rng.uniform();
            group.rollouts.push_back(r);
        }
        compute_advantages(group, 2.0);
        out.push_back(group);
    }
    return out;
}

inline broadrefine::PolicyParams random_params(std::size_t n, std::size_t m, Rng& rng, double scale) {
    auto p = PolicyParams::zeros(n, m, 0.99);
    for (auto& v : p.logits) v = (rng.uniform() * 2 - 1) * scale;
    for (auto& v : p.reference) v = (rng.uniform() * 2 - 1) * scale;
    return p;
}

inline double max_relative_error(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                          const std::vector<Group>& groups, const OptimizerConfig& cfg) {
    const auto analytic = objective(theta, old, ref, groups, cfg).gradient;
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.logits.size(); ++i) {
        auto plus = theta;
        auto minus = theta;
        plus.logits[i] += h;
        minus.logits[i] -= h;
        const double fd =
            (objective(plus, old, ref, groups, cfg).value - objective(minus, old, ref, groups, cfg).value) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    return worst;
}

}  // namespace fixture

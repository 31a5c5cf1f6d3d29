#pragma once

// Independent reference implementations used by the tests. Written from the
// definitions, not by calling into the library's matching code.

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "broadrefine/catalog.hpp"
#include "broadrefine/querylang.hpp"
#include "broadrefine/verifier.hpp"

namespace oracle {

using broadrefine::Constraint;
using broadrefine::ConstraintKind;
using broadrefine::Item;
using broadrefine::ItemId;

inline std::set<std::string> words(const std::string& text) {
    std::set<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || ch == '-' || ch == '_') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) out.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(cur);
    return out;
}

// One constraint against one item; `soft_pool` is the descriptor set the
// caller allows soft constraints to hit.
inline bool holds(const Constraint& c, const Item& item, const std::set<std::string>& soft_pool) {
    switch (c.kind) {
        case ConstraintKind::HardEquality: {
            auto it = item.attributes.find(c.key);
            return it != item.attributes.end() && it->second == c.value;
        }
        case ConstraintKind::NumericRange: {
            auto it = item.numeric.find(c.key);
            return it != item.numeric.end() && it->second >= c.lo && it->second <= c.hi;
        }
        case ConstraintKind::Negation: {
            auto it = item.attributes.find(c.key);
            return it == item.attributes.end() || it->second != c.value;
        }
        case ConstraintKind::SoftDescriptor:
            return soft_pool.count(c.value) != 0;
    }
    return false;
}

inline bool engine_match(const Item& item, const std::string& core, const std::vector<Constraint>& cs) {
    if (item.category != core) return false;
    for (const auto& c : cs) {
        if (!holds(c, item, item.tags)) return false;
    }
    return true;
}

// Full brute-force scan in ranking order (all matches tie on constraint
// count, so ascending id decides).
inline std::vector<ItemId> scan(const std::vector<Item>& items, const std::string& core,
                                const std::vector<Constraint>& cs) {
    std::vector<ItemId> out;
    for (const auto& it : items) {
        if (engine_match(it, core, cs)) out.push_back(it.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline bool relevant(const broadrefine::ParsedQuery& q, const Item& item, const broadrefine::UserContext& u) {
    if (item.category != q.core) return false;
    auto pool = item.tags;
    for (const auto& w : words(item.review_text)) pool.insert(w);
    for (const auto& w : words(item.ocr_text)) pool.insert(w);
    for (const auto& c : q.constraints) {
        if (!holds(c, item, pool)) return false;
    }
    if (!u.region.empty() && !item.region.empty() && item.region != "nationwide" && item.region != u.region) {
        return false;
    }
    for (const auto& [k, v] : u.blocked_values) {
        auto it = item.attributes.find(k);
        if (it != item.attributes.end() && it->second == v) return false;
    }
    return true;
}

inline Item make_item(ItemId id, std::string category, std::vector<std::pair<std::string, std::string>> attrs = {},
                      std::vector<std::string> tags = {}) {
    Item it;
    it.id = id;
    it.title = category + " " + std::to_string(id);
    it.category = std::move(category);
    for (auto& [k, v] : attrs) it.attributes[k] = v;
    for (auto& t : tags) it.tags.insert(t);
    it.region = "nationwide";
    return it;
}

struct Brute {
    std::string canonical;
    double score;
    std::size_t returned;
};

// Stage 3 + 4 from scratch: linear scan for the first K matches, oracle
// relevance, full sort, distinct strings.
inline std::vector<std::string> brute_topk(const broadrefine::ParsedQuery& q, const std::vector<Item>& items, std::size_t k,
                                    std::size_t limit) {
    std::vector<Brute> all;
    const std::size_t m = q.constraints.size();
    std::set<std::string> seen;
    for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
        std::vector<Constraint> cs;
        for (std::size_t j = 0; j < m; ++j) {
            if (mask >> j & 1u) cs.push_back(q.constraints[j]);
        }
        const auto text = broadrefine::serialize(broadrefine::RewriteSpec{q.core, cs});
        if (!seen.insert(text).second) continue;
        auto hits = scan(items, q.core, cs);
        if (hits.size() > limit) hits.resize(limit);
        std::size_t rel = 0;
        for (ItemId id : hits) {
            auto it = std::find_if(items.begin(), items.end(), [&](const Item& x) { return x.id == id; });
            rel += relevant(q, *it, {});
        }
        all.push_back({text, hits.empty() ? 0.0 : double(rel) / double(hits.size()), hits.size()});
    }
    std::sort(all.begin(), all.end(), [](const Brute& a, const Brute& b) {
        return std::make_tuple(-a.score, -static_cast<long>(a.returned), a.canonical) <
               std::make_tuple(-b.score, -static_cast<long>(b.returned), b.canonical);
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].canonical);
    return out;
}

}  // namespace oracle

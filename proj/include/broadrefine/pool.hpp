#pragma once

#include <cstddef>
#include <span>
#include <unordered_set>
#include <vector>

#include "broadrefine/catalog.hpp"
#include "broadrefine/verifier.hpp"

namespace broadrefine {

struct PoolEntry {
    ItemId item_id = 0;
    std::size_t rewrite = 0;

    friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

// Broadened candidates: the pre-deduplication multiset with provenance, the
// deduplicated list in first-occurrence order, and the verified subset.
struct CandidatePool {
    std::size_t rewrite_count = 0;
    std::vector<PoolEntry> pre_dedup;
    std::vector<ItemId> dedup;
    std::vector<std::size_t> first_source;  // parallel to dedup
    std::vector<Judgment> judgments;        // parallel to dedup once verified
    std::vector<ItemId> refined;

    // Appends one rewrite's results; returns the ids that were new to the pool.
    std::vector<ItemId> add(std::size_t rewrite, std::span<const ItemId> ids);

    bool contains(ItemId id) const { return seen_.count(id) != 0; }

private:
    std::unordered_set<ItemId> seen_;
};

}  // namespace broadrefine

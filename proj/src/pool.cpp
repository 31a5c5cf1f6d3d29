#include "broadrefine/pool.hpp"

namespace broadrefine {

std::vector<ItemId> CandidatePool::add(std::size_t rewrite, std::span<const ItemId> ids) {
    std::vector<ItemId> fresh;
    for (const ItemId id : ids) {
        pre_dedup.push_back({id, rewrite});
        if (seen_.insert(id).second) {
            dedup.push_back(id);
            first_source.push_back(rewrite);
            fresh.push_back(id);
        }
    }
    return fresh;
}

}  // namespace broadrefine

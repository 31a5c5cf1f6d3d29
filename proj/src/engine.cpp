#include "broadrefine/engine.hpp"

#include <algorithm>
#include <iterator>

#include "broadrefine/errors.hpp"

namespace broadrefine {

namespace {

using Postings = std::vector<ItemId>;

const Postings kEmpty;

template <typename Map, typename Key>
const Postings& postings_for(const Map& map, const Key& key) {
    const auto it = map.find(key);
    return it == map.end() ? kEmpty : it->second;
}

Postings intersect(const Postings& a, const Postings& b) {
    Postings out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

Postings subtract(const Postings& a, const Postings& b) {
    Postings out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

Index build_index(const Catalog& catalog) { return build_index(catalog.items()); }

Index build_index(const std::vector<Item>& items) {
    Index index;
    std::vector<ItemId> ids;
    ids.reserve(items.size());
    for (const auto& item : items) ids.push_back(item.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw DataError("duplicate item id in catalog");
    }

    for (const auto& item : items) {
        index.category_postings[item.category].push_back(item.id);
        for (const auto& [key, value] : item.attributes) {
            index.attribute_postings[{key, value}].push_back(item.id);
        }
        for (const auto& tag : item.tags) {
            index.tag_postings[tag].push_back(item.id);
        }
        for (const auto& [key, value] : item.numeric) {
            index.numeric_columns[key][item.id] = value;
        }
    }
    auto sort_all = [](auto& map) {
        for (auto& [_, list] : map) std::sort(list.begin(), list.end());
    };
    sort_all(index.category_postings);
    sort_all(index.attribute_postings);
    sort_all(index.tag_postings);
    index.item_count = items.size();
    return index;
}

SearchResult search(const Index& index, const SearchRequest& request) {
    if (request.limit == 0) {
        throw ContractError("search limit must be at least 1");
    }
    const auto& rewrite = request.rewrite;
    Postings matches = postings_for(index.category_postings, rewrite.core);

    for (const auto& c : rewrite.constraints) {
        if (matches.empty()) break;
        switch (c.kind) {
            case ConstraintKind::HardEquality:
                matches = intersect(matches, postings_for(index.attribute_postings, std::pair{c.key, c.value}));
                break;
            case ConstraintKind::Negation:
                matches = subtract(matches, postings_for(index.attribute_postings, std::pair{c.key, c.value}));
                break;
            case ConstraintKind::SoftDescriptor:
                matches = intersect(matches, postings_for(index.tag_postings, c.value));
                break;
            case ConstraintKind::NumericRange: {
                const auto column = index.numeric_columns.find(c.key);
                std::erase_if(matches, [&](ItemId id) {
                    if (column == index.numeric_columns.end()) return true;
                    const auto v = column->second.find(id);
                    return v == column->second.end() || v->second < c.lo || v->second > c.hi;
                });
                break;
            }
        }
    }

    // Every surviving item satisfies all rewrite constraints, so ranking by
    // (matched-constraint count desc, id asc) reduces to the posting order.
    SearchResult result;
    result.total_matches = matches.size();
    if (request.offset < matches.size()) {
        const auto first = matches.begin() + static_cast<std::ptrdiff_t>(request.offset);
        const auto count = std::min(request.limit, matches.size() - request.offset);
        result.item_ids.assign(first, first + static_cast<std::ptrdiff_t>(count));
    }
    return result;
}

SearchResult IndexBackend::search(const SearchRequest& request) const {
    return broadrefine::search(*index_, request);
}

}  // namespace broadrefine

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "broadrefine/catalog.hpp"
#include "broadrefine/querylang.hpp"

namespace broadrefine {

// Default per-query result cap.
inline constexpr std::size_t kDefaultResultLimit = 20;

// Inverted index over a catalog. Postings are sorted by ascending item id.
struct Index {
    std::map<std::string, std::vector<ItemId>> category_postings;
    std::map<std::pair<std::string, std::string>, std::vector<ItemId>> attribute_postings;
    std::map<std::string, std::vector<ItemId>> tag_postings;
    std::map<std::string, std::unordered_map<ItemId, double>> numeric_columns;
    std::size_t item_count = 0;
};

struct SearchRequest {
    RewriteSpec rewrite;
    std::size_t limit = kDefaultResultLimit;
    std::size_t offset = 0;
};

struct SearchResult {
    std::vector<ItemId> item_ids;
    std::size_t total_matches = 0;

    friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

// Throws DataError on duplicate ids.
Index build_index(const Catalog& catalog);
Index build_index(const std::vector<Item>& items);

// Conjunctive match: category, hard equalities, ranges, negations and soft
// descriptors (against tags only). Unknown categories yield an empty result.
SearchResult search(const Index& index, const SearchRequest& request);

// The only surface through which the pipeline reaches an engine.
class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual SearchResult search(const SearchRequest& request) const = 0;
};

class IndexBackend final : public SearchBackend {
public:
    explicit IndexBackend(const Index& index) : index_(&index) {}
    SearchResult search(const SearchRequest& request) const override;

private:
    const Index* index_;
};

}  // namespace broadrefine

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace broadrefine {

using ItemId = std::uint64_t;

struct Item {
    ItemId id = 0;
    std::string title;
    std::string category;
    std::map<std::string, std::string> attributes;
    std::map<std::string, double> numeric;
    std::set<std::string> tags;
    std::string region;
    std::string review_text;
    std::string ocr_text;

    friend bool operator==(const Item&, const Item&) = default;
};

struct NumericRange {
    double lo = 0.0;
    double hi = 0.0;

    friend bool operator==(const NumericRange&, const NumericRange&) = default;
};

struct CategorySchema {
    std::string name;
    std::map<std::string, std::vector<std::string>> attributes;
    std::map<std::string, NumericRange> numeric;
    std::vector<std::string> tags;
    // Soft tag -> (attribute key, value) that makes the tag likely.
    std::map<std::string, std::pair<std::string, std::string>> tag_affinity;

    friend bool operator==(const CategorySchema&, const CategorySchema&) = default;
};

struct Schema {
    std::vector<CategorySchema> categories;
    // The first region is the nationwide one, compatible with every user.
    std::vector<std::string> regions;

    const CategorySchema* find(std::string_view category) const;
    void validate() const;  // throws ConfigError

    friend bool operator==(const Schema&, const Schema&) = default;
};

// Five apparel/home categories with 4-8 attribute keys each.
Schema reference_schema();

struct CatalogSpec {
    std::size_t num_items = 10000;
    Schema schema = reference_schema();
    std::uint64_t seed = 0;
};

// Immutable item collection with id lookup.
class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<Item> items);  // throws DataError on duplicate ids

    const std::vector<Item>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const Item* find(ItemId id) const;
    const Item& at(ItemId id) const;  // throws DataError

private:
    std::vector<Item> items_;
    std::unordered_map<ItemId, std::size_t> position_;
};

struct QueryRecord {
    std::string query_text;
    std::string gold_rewrite;
    ItemId source_item = 0;

    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

// Lowercased tokens of free text; '-' and '_' stay inside tokens.
std::vector<std::string> tokenize_text(std::string_view text);

// Soft-descriptor vocabulary an item carries across tags, review and OCR text.
std::set<std::string> item_descriptors(const Item& item);

Catalog generate_catalog(const CatalogSpec& spec);

QueryRecord inverse_augment(const Item& item, const Schema& schema, std::uint64_t seed);

// Level 0 emits gold rewrites verbatim; higher levels add soft descriptors
// and a negation. From level 2 on at least 20% of the queries are forced to
// have no exact-conjunction match in the engine.
std::vector<QueryRecord> build_query_benchmark(const Catalog& catalog, const Schema& schema,
                                               std::size_t count, int over_constraint_level,
                                               std::uint64_t seed);

void to_json(nlohmann::json& j, const Item& item);
void from_json(const nlohmann::json& j, Item& item);
void to_json(nlohmann::json& j, const Schema& schema);
void from_json(const nlohmann::json& j, Schema& schema);
void to_json(nlohmann::json& j, const QueryRecord& record);
void from_json(const nlohmann::json& j, QueryRecord& record);

void write_catalog_jsonl(std::ostream& out, const Catalog& catalog);
Catalog read_catalog_jsonl(std::istream& in);
void write_benchmark_jsonl(std::ostream& out, const std::vector<QueryRecord>& records);
std::vector<QueryRecord> read_benchmark_jsonl(std::istream& in);

}  // namespace broadrefine

#include "broadrefine/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "broadrefine/engine.hpp"
#include "broadrefine/errors.hpp"
#include "broadrefine/querylang.hpp"
#include "broadrefine/random.hpp"

namespace broadrefine {

namespace {

CategorySchema make_category(std::string name, std::map<std::string, std::vector<std::string>> attributes,
                             NumericRange price, std::vector<std::string> tags,
                             std::map<std::string, std::pair<std::string, std::string>> affinity) {
    CategorySchema c;
    c.name = std::move(name);
    c.attributes = std::move(attributes);
    c.numeric = {{"price", price}, {"sales", {0, 5000}}};
    c.tags = std::move(tags);
    c.tag_affinity = std::move(affinity);
    return c;
}

// Probability that an item carries a descriptor: with its affinity value,
// without it, and for descriptors that have no affinity.
constexpr double kAffinityHit = 0.85;
constexpr double kAffinityMiss = 0.05;
constexpr double kNoAffinity = 0.15;
// Share of carried descriptors that reach the indexed tags.
constexpr double kIndexedShare = 0.35;

// Attribute subset size kept in gold rewrites.
constexpr std::size_t kMaxGoldAttributes = 3;

struct Extras {
    std::size_t soft = 0;
    bool negation = false;
};

Extras extras_for_level(int level) {
    switch (level) {
        case 0: return {0, false};
        case 1: return {1, false};
        case 2: return {2, true};
        default: return {3, true};
    }
}

struct GeneratedQuery {
    std::vector<Constraint> gold;
    std::vector<Constraint> query;
};

// Soft descriptors come from what the source item carries (tags or text).
// The gold rewrite keeps the attributes those descriptors have affinity with
// plus a random share of the rest, at most kMaxGoldAttributes in total. The
// negation excludes a value the item does not have, so the source item stays
// relevant to its own query.
GeneratedQuery generate_query(const Item& item, const CategorySchema* category, Extras extras, Rng& rng) {
    std::vector<std::string> softs;
    std::vector<std::string> preferred;
    if (category != nullptr && extras.soft > 0) {
        const auto carried = item_descriptors(item);
        std::vector<std::string> own;
        for (const auto& t : category->tags) {
            if (carried.count(t)) own.push_back(t);
        }
        rng.shuffle(own);
        for (const auto& t : own) {
            if (softs.size() == extras.soft) break;
            softs.push_back(t);
            if (const auto a = category->tag_affinity.find(t); a != category->tag_affinity.end()) {
                const auto v = item.attributes.find(a->second.first);
                if (v != item.attributes.end() && v->second == a->second.second &&
                    std::find(preferred.begin(), preferred.end(), v->first) == preferred.end()) {
                    preferred.push_back(v->first);
                }
            }
        }
    }

    std::vector<std::string> keys;
    for (const auto& [key, _] : item.attributes) {
        if (std::find(preferred.begin(), preferred.end(), key) == preferred.end()) keys.push_back(key);
    }
    rng.shuffle(keys);
    GeneratedQuery out;
    for (const auto& key : preferred) {
        if (out.gold.size() < kMaxGoldAttributes) out.gold.push_back(Constraint::hard(key, item.attributes.at(key)));
    }
    for (const auto& key : keys) {
        if (rng.bernoulli(0.5) && out.gold.size() < kMaxGoldAttributes) {
            out.gold.push_back(Constraint::hard(key, item.attributes.at(key)));
        }
    }
    canonicalize(out.gold);

    out.query = out.gold;
    for (const auto& t : softs) out.query.push_back(Constraint::soft(t));
    if (extras.negation && category != nullptr) {
        std::vector<std::string> neg_keys;
        for (const auto& [key, values] : category->attributes) {
            const bool in_gold =
                std::any_of(out.gold.begin(), out.gold.end(), [&](const Constraint& c) { return c.key == key; });
            if (!in_gold && values.size() > 1) neg_keys.push_back(key);
        }
        if (!neg_keys.empty()) {
            const auto& key = neg_keys[rng.below(neg_keys.size())];
            std::vector<std::string> values;
            const auto own_value = item.attributes.find(key);
            for (const auto& v : category->attributes.at(key)) {
                if (own_value == item.attributes.end() || own_value->second != v) values.push_back(v);
            }
            if (!values.empty()) out.query.push_back(Constraint::negation(key, values[rng.below(values.size())]));
        }
    }
    canonicalize(out.query);
    return out;
}

QueryRecord make_record(const Item& item, const std::vector<Constraint>& gold, const std::vector<Constraint>& query) {
    QueryRecord record;
    record.gold_rewrite = serialize(RewriteSpec{item.category, gold});
    record.query_text = serialize(ParsedQuery{item.category, query});
    record.source_item = item.id;
    return record;
}

std::string pick(const std::vector<std::string>& values, Rng& rng) {
    return values[rng.below(values.size())];
}

}  // namespace

Schema reference_schema() {
    Schema s;
    s.regions = {"nationwide", "north", "south", "east", "west"};
    s.categories.push_back(make_category(
        "blazer",
        {{"material", {"linen", "wool", "cotton", "polyester", "tweed"}},
         {"color", {"black", "navy", "grey", "beige", "white", "brown"}},
         {"fit", {"slim", "regular", "relaxed"}},
         {"gender", {"men", "women", "unisex"}},
         {"season", {"summer", "winter", "all-season"}},
         {"lapel", {"notch", "peak", "shawl"}}},
        {150, 1500},
        {"breathable", "wrinkle-free", "formal", "casual", "beach-wedding", "lightweight", "stretchy", "office",
         "vintage", "tailored"},
        {{"breathable", {"material", "linen"}}, {"lightweight", {"material", "linen"}}, {"beach-wedding", {"material", "linen"}}, {"casual", {"material", "linen"}}, {"formal", {"material", "wool"}}, {"office", {"material", "wool"}}, {"tailored", {"material", "wool"}}, {"vintage", {"material", "tweed"}}, {"wrinkle-free", {"material", "polyester"}}, {"stretchy", {"material", "polyester"}}}));
    s.categories.push_back(make_category(
        "headphones",
        {{"type", {"over-ear", "in-ear", "on-ear"}},
         {"connectivity", {"bluetooth", "wired", "usb-c"}},
         {"color", {"black", "white", "silver", "blue"}},
         {"brand", {"sonara", "aurio", "beatline", "klang"}}},
        {50, 2500},
        {"quiet", "bass-heavy", "long-battery", "foldable", "gaming", "sport", "sweatproof", "studio", "compact",
         "lightweight"},
        {{"quiet", {"type", "over-ear"}}, {"studio", {"type", "over-ear"}}, {"bass-heavy", {"type", "over-ear"}}, {"compact", {"type", "in-ear"}}, {"sport", {"type", "in-ear"}}, {"sweatproof", {"type", "in-ear"}}, {"lightweight", {"type", "in-ear"}}, {"foldable", {"type", "on-ear"}}, {"long-battery", {"connectivity", "bluetooth"}}, {"gaming", {"connectivity", "wired"}}}));
    s.categories.push_back(make_category(
        "sofa",
        {{"material", {"leather", "fabric", "velvet", "linen"}},
         {"color", {"grey", "beige", "green", "blue", "black"}},
         {"seats", {"two", "three", "four"}},
         {"style", {"modern", "mid-century", "classic", "scandinavian"}},
         {"shape", {"straight", "l-shaped", "curved"}},
         {"frame", {"oak", "pine", "metal"}},
         {"legs", {"wood", "steel", "hidden"}}},
        {800, 12000},
        {"cozy", "pet-friendly", "stain-resistant", "compact", "convertible", "firm", "plush", "easy-assembly",
         "washable", "durable"},
        {{"durable", {"material", "leather"}}, {"firm", {"material", "leather"}}, {"washable", {"material", "fabric"}}, {"pet-friendly", {"material", "fabric"}}, {"stain-resistant", {"material", "fabric"}}, {"plush", {"material", "velvet"}}, {"cozy", {"material", "velvet"}}, {"compact", {"seats", "two"}}, {"convertible", {"shape", "l-shaped"}}, {"easy-assembly", {"frame", "pine"}}}));
    s.categories.push_back(make_category(
        "sneakers",
        {{"brand", {"stride", "volt", "aero", "kinetic"}},
         {"color", {"white", "black", "grey", "red", "blue"}},
         {"material", {"mesh", "leather", "canvas", "suede", "knit"}},
         {"closure", {"laces", "slip-on", "velcro"}},
         {"gender", {"men", "women", "unisex"}},
         {"sole", {"rubber", "foam", "gum"}},
         {"size_range", {"kids", "adult"}},
         {"use", {"running", "walking", "court", "trail"}}},
        {100, 1800},
        {"breathable", "cushioned", "lightweight", "waterproof", "wide-fit", "retro", "minimalist", "non-slip",
         "durable", "vegan"},
        {{"cushioned", {"use", "running"}}, {"lightweight", {"use", "running"}}, {"breathable", {"use", "running"}}, {"waterproof", {"use", "trail"}}, {"non-slip", {"use", "trail"}}, {"durable", {"use", "trail"}}, {"retro", {"use", "court"}}, {"wide-fit", {"use", "walking"}}, {"vegan", {"material", "canvas"}}, {"minimalist", {"material", "knit"}}}));
    s.categories.push_back(make_category(
        "backpack",
        {{"material", {"nylon", "canvas", "leather", "polyester"}},
         {"color", {"black", "grey", "navy", "olive", "tan"}},
         {"capacity", {"small", "medium", "large"}},
         {"laptop", {"13in", "15in", "17in", "none"}},
         {"closure", {"zip", "drawstring", "flap"}}},
        {60, 1200},
        {"waterproof", "anti-theft", "lightweight", "ergonomic", "travel", "school", "hiking", "minimalist", "durable",
         "expandable"},
        {{"waterproof", {"material", "nylon"}}, {"lightweight", {"material", "nylon"}}, {"travel", {"capacity", "large"}}, {"hiking", {"capacity", "large"}}, {"expandable", {"capacity", "large"}}, {"ergonomic", {"laptop", "15in"}}, {"school", {"laptop", "15in"}}, {"anti-theft", {"closure", "zip"}}, {"minimalist", {"material", "canvas"}}, {"durable", {"material", "leather"}}}));
    return s;
}

const CategorySchema* Schema::find(std::string_view category) const {
    for (const auto& c : categories) {
        if (c.name == category) return &c;
    }
    return nullptr;
}

void Schema::validate() const {
    if (categories.empty()) throw ConfigError("schema has no categories");
    if (regions.empty()) throw ConfigError("schema has no regions");
    for (const auto& r : regions) {
        if (!is_valid_token(r)) throw ConfigError("invalid region token '" + r + "'");
    }
    std::set<std::string> names;
    for (const auto& c : categories) {
        if (!is_valid_token(c.name)) throw ConfigError("invalid category name '" + c.name + "'");
        if (!names.insert(c.name).second) throw ConfigError("duplicate category '" + c.name + "'");
        if (c.attributes.empty()) throw ConfigError("category '" + c.name + "' has no attribute keys");
        for (const auto& [key, values] : c.attributes) {
            if (!is_valid_token(key)) throw ConfigError("invalid attribute key '" + key + "'");
            if (values.empty()) {
                throw ConfigError("empty value vocabulary for '" + c.name + "." + key + "'");
            }
            for (const auto& v : values) {
                if (!is_valid_token(v)) throw ConfigError("invalid value token '" + v + "' for '" + key + "'");
            }
        }
        for (const auto& [key, range] : c.numeric) {
            if (!is_valid_token(key)) throw ConfigError("invalid numeric key '" + key + "'");
            if (!(range.lo <= range.hi)) throw ConfigError("inverted numeric range for '" + c.name + "." + key + "'");
            if (key == "price" && range.lo <= 0) throw ConfigError("price range must be positive");
        }
        if (c.tags.empty()) throw ConfigError("empty soft-tag vocabulary for '" + c.name + "'");
        for (const auto& t : c.tags) {
            if (!is_valid_token(t)) throw ConfigError("invalid tag token '" + t + "'");
        }
        for (const auto& [tag, target] : c.tag_affinity) {
            const auto values = c.attributes.find(target.first);
            if (std::find(c.tags.begin(), c.tags.end(), tag) == c.tags.end() || values == c.attributes.end() ||
                std::find(values->second.begin(), values->second.end(), target.second) == values->second.end()) {
                throw ConfigError("tag affinity '" + tag + "' in '" + c.name + "' names an unknown tag or value");
            }
        }
    }
}

Catalog::Catalog(std::vector<Item> items) : items_(std::move(items)) {
    position_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!position_.emplace(items_[i].id, i).second) {
            throw DataError("duplicate item id " + std::to_string(items_[i].id));
        }
        if (items_[i].category.empty()) {
            throw DataError("item " + std::to_string(items_[i].id) + " has an empty category");
        }
    }
}

const Item* Catalog::find(ItemId id) const {
    const auto it = position_.find(id);
    return it == position_.end() ? nullptr : &items_[it->second];
}

const Item& Catalog::at(ItemId id) const {
    const auto* item = find(id);
    if (item == nullptr) throw DataError("unknown item id " + std::to_string(id));
    return *item;
}

std::vector<std::string> tokenize_text(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_') {
            current.push_back(static_cast<char>(c));
        } else if (c >= 'A' && c <= 'Z') {
            current.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::set<std::string> item_descriptors(const Item& item) {
    std::set<std::string> out(item.tags.begin(), item.tags.end());
    for (auto& t : tokenize_text(item.review_text)) out.insert(std::move(t));
    for (auto& t : tokenize_text(item.ocr_text)) out.insert(std::move(t));
    return out;
}

Catalog generate_catalog(const CatalogSpec& spec) {
    spec.schema.validate();
    const auto& categories = spec.schema.categories;
    Rng rng(spec.seed);
    std::vector<Item> items;
    items.reserve(spec.num_items);

    for (std::size_t i = 0; i < spec.num_items; ++i) {
        Item item;
        item.id = i;
        // The first items cycle through categories so every schema key is used.
        const auto& cat = i < categories.size() ? categories[i] : categories[rng.below(categories.size())];
        item.category = cat.name;
        for (const auto& [key, values] : cat.attributes) {
            item.attributes[key] = pick(values, rng);
        }
        for (const auto& [key, range] : cat.numeric) {
            item.numeric[key] = static_cast<double>(
                rng.between(static_cast<std::int64_t>(std::ceil(range.lo)), static_cast<std::int64_t>(std::floor(range.hi))));
        }
        item.region = rng.bernoulli(0.5) ? spec.schema.regions.front() : pick(spec.schema.regions, rng);

        // A carried descriptor lands either in the indexed tags or only in the
        // review / OCR text, which the engine does not see.
        std::vector<std::string> review;
        std::vector<std::string> ocr;
        for (const auto& tag : cat.tags) {
            double p = kNoAffinity;
            if (const auto a = cat.tag_affinity.find(tag); a != cat.tag_affinity.end()) {
                const auto v = item.attributes.find(a->second.first);
                p = v != item.attributes.end() && v->second == a->second.second ? kAffinityHit : kAffinityMiss;
            }
            if (!rng.bernoulli(p)) continue;
            const double u = rng.uniform();
            if (u < kIndexedShare) {
                item.tags.insert(tag);
            } else if (u < kIndexedShare + (1.0 - kIndexedShare) / 2) {
                review.push_back(tag);
            } else {
                ocr.push_back(tag);
            }
        }

        std::string title;
        for (const auto& [key, value] : item.attributes) {
            if (title.size() > 24) break;
            title += value + " ";
        }
        item.title = title + cat.name;

        item.review_text = "Bought this " + cat.name + " last month.";
        for (const auto& r : review) item.review_text += " Really " + r + ".";
        item.ocr_text = "Detail page: " + item.attributes.begin()->second + " " + cat.name;
        for (const auto& o : ocr) item.ocr_text += ", " + o;
        item.ocr_text += ".";
        items.push_back(std::move(item));
    }
    return Catalog(std::move(items));
}

QueryRecord inverse_augment(const Item& item, const Schema& schema, std::uint64_t seed) {
    Rng rng(mix_seed(seed, item.id));
    Extras extras;
    extras.soft = static_cast<std::size_t>(rng.below(3));
    extras.negation = rng.bernoulli(0.5);
    const auto generated = generate_query(item, schema.find(item.category), extras, rng);
    return make_record(item, generated.gold, generated.query);
}

std::vector<QueryRecord> build_query_benchmark(const Catalog& catalog, const Schema& schema, std::size_t count,
                                               int over_constraint_level, std::uint64_t seed) {
    if (catalog.empty()) throw ConfigError("cannot build a benchmark from an empty catalog");
    if (over_constraint_level < 0) throw ConfigError("over_constraint_level must be non-negative");

    const Index index = build_index(catalog);
    const auto extras = extras_for_level(over_constraint_level);
    const std::size_t required_zero =
        over_constraint_level >= 2 ? static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(count))) : 0;

    Rng rng(seed);
    std::vector<QueryRecord> out;
    out.reserve(count);
    std::size_t zero = 0;

    auto matches = [&](const std::string& core, const std::vector<Constraint>& constraints) {
        return search(index, {RewriteSpec{core, constraints}, 1, 0}).total_matches;
    };

    for (std::size_t k = 0; k < count; ++k) {
        const auto& item = catalog.items()[rng.below(catalog.size())];
        const auto* category = schema.find(item.category);
        auto [gold, query] = generate_query(item, category, extras, rng);

        const bool must_be_zero = required_zero > zero && required_zero - zero >= count - k;
        if (must_be_zero && matches(item.category, query) > 0 && category != nullptr) {
            // Over-constrain with the item's text-only descriptors first (the
            // item stays verifier-relevant), then with arbitrary vocabulary.
            std::vector<std::string> candidates;
            const auto own = item_descriptors(item);
            for (const auto& t : category->tags) {
                if (own.count(t) && !item.tags.count(t)) candidates.push_back(t);
            }
            std::vector<std::string> rest;
            for (const auto& t : category->tags) {
                if (!own.count(t)) rest.push_back(t);
            }
            rng.shuffle(candidates);
            rng.shuffle(rest);
            candidates.insert(candidates.end(), rest.begin(), rest.end());
            for (const auto& t : candidates) {
                if (matches(item.category, query) == 0) break;
                query.push_back(Constraint::soft(t));
                canonicalize(query);
            }
        }
        if (matches(item.category, query) == 0) ++zero;
        out.push_back(make_record(item, gold, query));
    }
    return out;
}

void to_json(nlohmann::json& j, const Item& item) {
    j = nlohmann::json{{"id", item.id},
                       {"title", item.title},
                       {"category", item.category},
                       {"attributes", item.attributes},
                       {"numeric", item.numeric},
                       {"tags", item.tags},
                       {"region", item.region},
                       {"review_text", item.review_text},
                       {"ocr_text", item.ocr_text}};
}

void from_json(const nlohmann::json& j, Item& item) {
    item.id = j.at("id").get<ItemId>();
    item.title = j.value("title", std::string{});
    item.category = j.at("category").get<std::string>();
    item.attributes = j.value("attributes", std::map<std::string, std::string>{});
    item.numeric = j.value("numeric", std::map<std::string, double>{});
    item.tags = j.value("tags", std::set<std::string>{});
    item.region = j.value("region", std::string{});
    item.review_text = j.value("review_text", std::string{});
    item.ocr_text = j.value("ocr_text", std::string{});
    if (auto p = item.numeric.find("price"); p != item.numeric.end() && !(p->second > 0)) {
        throw DataError("item " + std::to_string(item.id) + " has a non-positive price");
    }
}

void to_json(nlohmann::json& j, const Schema& schema) {
    j = nlohmann::json::object();
    j["regions"] = schema.regions;
    auto& cats = j["categories"] = nlohmann::json::array();
    for (const auto& c : schema.categories) {
        nlohmann::json numeric = nlohmann::json::object();
        for (const auto& [key, r] : c.numeric) numeric[key] = nlohmann::json::array({r.lo, r.hi});
        nlohmann::json affinity = nlohmann::json::object();
        for (const auto& [tag, target] : c.tag_affinity) affinity[tag] = nlohmann::json::array({target.first, target.second});
        cats.push_back({{"name", c.name},
                        {"attributes", c.attributes},
                        {"numeric", numeric},
                        {"tags", c.tags},
                        {"tag_affinity", affinity}});
    }
}

void from_json(const nlohmann::json& j, Schema& schema) {
    schema = Schema{};
    schema.regions = j.at("regions").get<std::vector<std::string>>();
    for (const auto& jc : j.at("categories")) {
        CategorySchema c;
        c.name = jc.at("name").get<std::string>();
        c.attributes = jc.at("attributes").get<std::map<std::string, std::vector<std::string>>>();
        const auto numeric = jc.value("numeric", nlohmann::json::object());
        for (const auto& [key, r] : numeric.items()) {
            c.numeric[key] = {r.at(0).get<double>(), r.at(1).get<double>()};
        }
        c.tags = jc.at("tags").get<std::vector<std::string>>();
        const auto affinity = jc.value("tag_affinity", nlohmann::json::object());
        for (const auto& [tag, target] : affinity.items()) {
            c.tag_affinity[tag] = {target.at(0).get<std::string>(), target.at(1).get<std::string>()};
        }
        schema.categories.push_back(std::move(c));
    }
}

void to_json(nlohmann::json& j, const QueryRecord& record) {
    j = nlohmann::json{
        {"query_text", record.query_text}, {"gold_rewrite", record.gold_rewrite}, {"source_item", record.source_item}};
}

void from_json(const nlohmann::json& j, QueryRecord& record) {
    record.query_text = j.at("query_text").get<std::string>();
    record.gold_rewrite = j.at("gold_rewrite").get<std::string>();
    record.source_item = j.at("source_item").get<ItemId>();
}

namespace {

template <typename T>
std::vector<T> read_jsonl(std::istream& in, std::string_view what) {
    std::vector<T> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<T>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

void write_catalog_jsonl(std::ostream& out, const Catalog& catalog) {
    for (const auto& item : catalog.items()) out << nlohmann::json(item).dump() << '\n';
}

Catalog read_catalog_jsonl(std::istream& in) { return Catalog(read_jsonl<Item>(in, "catalog")); }

void write_benchmark_jsonl(std::ostream& out, const std::vector<QueryRecord>& records) {
    for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

std::vector<QueryRecord> read_benchmark_jsonl(std::istream& in) {
    auto records = read_jsonl<QueryRecord>(in, "benchmark");
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            (void)parse(records[i].query_text);
            (void)parse(records[i].gold_rewrite);
        } catch (const ParseError& e) {
            throw DataError("benchmark record " + std::to_string(i) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace broadrefine

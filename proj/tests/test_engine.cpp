#include <gtest/gtest.h>

#include <algorithm>

#include "broadrefine/catalog.hpp"
#include "broadrefine/engine.hpp"
#include "broadrefine/errors.hpp"
#include "broadrefine/random.hpp"
#include "oracles.hpp"

using namespace broadrefine;

namespace {

std::vector<Item> small_catalog() {
    return {
        oracle::make_item(7, "blazer", {{"material", "linen"}, {"color", "black"}}, {"formal"}),
        oracle::make_item(2, "blazer", {{"material", "wool"}, {"color", "black"}}),
        oracle::make_item(4, "blazer", {{"material", "linen"}, {"color", "black"}}, {"formal", "breathable"}),
        oracle::make_item(9, "sofa", {{"material", "linen"}}),
    };
}

}  // namespace

TEST(Engine, EmptyCatalog) {
    auto idx = build_index(std::vector<Item>{});
    EXPECT_TRUE(idx.category_postings.empty());
    EXPECT_EQ(search(idx, {RewriteSpec{"blazer", {}}, 20, 0}).total_matches, 0u);
}

TEST(Engine, CategoryScan) {
    auto items = small_catalog();
    auto idx = build_index(items);
    auto r = search(idx, {RewriteSpec{"blazer", {}}, 20, 0});
    EXPECT_EQ(r.item_ids, (std::vector<ItemId>{2, 4, 7}));
    EXPECT_EQ(r.total_matches, 3u);
    EXPECT_EQ(r.item_ids, oracle::scan(items, "blazer", {}));
}

TEST(Engine, NegationExcludingAll) {
    auto idx = build_index(small_catalog());
    auto r = search(idx, {RewriteSpec{"blazer", {Constraint::negation("color", "black")}}, 20, 0});
    EXPECT_TRUE(r.item_ids.empty());
    EXPECT_EQ(r.total_matches, 0u);
}

TEST(Engine, SoftUsesTagsOnly) {
    auto items = small_catalog();
    items[1].review_text = "very formal";
    auto idx = build_index(items);
    auto r = search(idx, {RewriteSpec{"blazer", {Constraint::soft("formal")}}, 20, 0});
    EXPECT_EQ(r.item_ids, (std::vector<ItemId>{4, 7}));
}

TEST(Engine, PaginationBoundary) {
    auto idx = build_index(small_catalog());
    auto r = search(idx, {RewriteSpec{"blazer", {}}, 2, 3});
    EXPECT_TRUE(r.item_ids.empty());
    EXPECT_EQ(r.total_matches, 3u);
    r = search(idx, {RewriteSpec{"blazer", {}}, 2, 1});
    EXPECT_EQ(r.item_ids, (std::vector<ItemId>{4, 7}));
    EXPECT_EQ(search(idx, {RewriteSpec{"tent", {}}, 2, 0}).total_matches, 0u);
    EXPECT_THROW(search(idx, {RewriteSpec{"blazer", {}}, 0, 0}), ContractError);
}

TEST(Engine, DuplicateIds) {
    std::vector<Item> items{oracle::make_item(1, "sofa"), oracle::make_item(1, "bag")};
    EXPECT_THROW(build_index(items), DataError);
}

class ReferenceEngine : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        CatalogSpec spec;
        spec.num_items = 10000;
        spec.seed = 1;
        catalog_ = new Catalog(generate_catalog(spec));
        index_ = new Index(build_index(*catalog_));
    }
    static void TearDownTestSuite() {
        delete index_;
        delete catalog_;
    }
    static Catalog* catalog_;
    static Index* index_;
};

Catalog* ReferenceEngine::catalog_ = nullptr;
Index* ReferenceEngine::index_ = nullptr;

TEST_F(ReferenceEngine, PostingsCoverCatalog) {
    std::size_t total = 0;
    for (const auto& [cat, ids] : index_->category_postings) {
        total += ids.size();
        EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    }
    EXPECT_EQ(total, 10000u);
    for (const auto& [k, ids] : index_->attribute_postings) EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    for (const auto& [k, ids] : index_->tag_postings) EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST_F(ReferenceEngine, MonotoneAndPaginated) {
    Rng rng(77);
    const auto& items = catalog_->items();
    for (int trial = 0; trial < 100; ++trial) {
        const auto& src = items[rng.below(items.size())];
        std::vector<Constraint> cs;
        std::size_t prev = search(*index_, {RewriteSpec{src.category, cs}, 5, 0}).total_matches;
        for (const auto& [k, v] : src.attributes) {
            if (!rng.bernoulli(0.5)) continue;
            cs.push_back(Constraint::hard(k, v));
            auto now = search(*index_, {RewriteSpec{src.category, cs}, 5, 0}).total_matches;
            EXPECT_LE(now, prev);
            prev = now;
        }
        const auto full = oracle::scan(items, src.category, cs);
        std::vector<ItemId> joined;
        const std::size_t k = 7;
        for (std::size_t off = 0; off < full.size(); off += k) {
            auto page = search(*index_, {RewriteSpec{src.category, cs}, k, off});
            joined.insert(joined.end(), page.item_ids.begin(), page.item_ids.end());
        }
        EXPECT_EQ(joined, full);
    }
}

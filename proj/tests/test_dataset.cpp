#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "ccgen/dataset.hpp"
#include "ccgen/synth.hpp"
#include "support/test_support.hpp"

using namespace ccgen;
using ccgen::support::fixture;

namespace {

ConceptSet make_set(std::initializer_list<const char*> names) {
    ConceptSet s;
    for (auto n : names) s.intern(n);
    s.freeze();
    return s;
}

}  // namespace

TEST(MapProduct, DeepestPathElementInSet) {
    auto set = make_set({"Electronics", "Digital Cameras", "Batteries"});
    CatalogEntry e{"B00004TJ7O", {"Electronics", "Camera & Photo", "Digital Cameras", "Point & Shoot Digital Cameras"}};
    const Concept* c = map_product_to_concept(e, set);
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->surface, "Digital Cameras");

    CatalogEntry leaf{"p", {"Electronics", "Batteries"}};
    EXPECT_EQ(map_product_to_concept(leaf, set)->surface, "Batteries");
    CatalogEntry none{"q", {"Garden", "Hoses"}};
    EXPECT_EQ(map_product_to_concept(none, set), nullptr);
}

TEST(FilterTokens, Boundary) {
    EXPECT_TRUE(filter_concept_by_tokens("Point & Shoot Digital Cameras"));
    EXPECT_TRUE(filter_concept_by_tokens("Batteries"));
    EXPECT_TRUE(filter_concept_by_tokens("a b c d e f"));
    EXPECT_FALSE(filter_concept_by_tokens("a b c d e f g"));
}

TEST(PrepareConcepts, DropsLongAndRejectsGrammarCollisions) {
    auto raw = make_set({"Digital Cameras", "one two three four five six seven", "Batteries"});
    auto s = prepare_concept_set(raw);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.at(1).surface, "Batteries");
    EXPECT_THROW(prepare_concept_set(make_set({"Lens 2) Caps"})), DataError);
    EXPECT_THROW(prepare_concept_set(make_set({"Cables: USB"})), DataError);
    EXPECT_THROW(prepare_concept_set(make_set({"[EOS] Caps"})), DataError);
}

TEST(ConfidenceTable, SingleRecordAndHalfConfidence) {
    ConfidenceTable t;
    t.add_record(0, {1});
    EXPECT_EQ(t.freq(0), 1u);
    EXPECT_EQ(t.cofreq(0, 1), 1u);
    EXPECT_DOUBLE_EQ(t.conf(0, 1), 1.0);

    ConfidenceTable h;
    h.add_record(0, {1});
    h.add_record(0, {1, 2});
    h.add_record(0, {2});
    h.add_record(0, {});
    EXPECT_EQ(h.freq(0), 4u);
    EXPECT_EQ(h.cofreq(0, 1), 2u);
    EXPECT_EQ(h.conf(0, 1), 0.5);
    EXPECT_EQ(h.conf(1, 0), 0.0);  // directed
}

TEST(ConfidenceTable, SelfPairsAndRepeatsWithinRecord) {
    ConfidenceTable t;
    t.add_record(0, {0, 1, 1, 1});
    EXPECT_EQ(t.cofreq(0, 0), 0u);
    EXPECT_EQ(t.cofreq(0, 1), 1u);
}

TEST(ConfidenceTable, EmptyBehaviorGivesEmptyTable) {
    auto g = support::golden_fixture();
    auto t = build_confidence_table(g.catalog, {}, g.set);
    EXPECT_TRUE(t.empty());
    EXPECT_TRUE(build_ranked_lists(t, g.set, 3, 1).empty());
}

TEST(ConfidenceTable, ShardsMergeToTheWhole) {
    auto g = support::golden_fixture();
    std::vector<BehaviorRecord> a(g.behavior.begin(), g.behavior.begin() + 7), b(g.behavior.begin() + 7, g.behavior.end());
    auto ta = build_confidence_table(g.catalog, a, g.set);
    auto tb = build_confidence_table(g.catalog, b, g.set);
    ta.merge(tb);
    EXPECT_EQ(ta.to_json(), g.table.to_json());
}

TEST(GoldenFixture, TableAndListsMatchIndependentCount) {
    auto g = support::golden_fixture();
    const auto text = canonical_table_text(g.table, g.lists, g.set);
    EXPECT_EQ(text, read_text_file(fixture("golden20/golden_table.txt")));
}

TEST(GoldenFixture, HalfConfidenceCase) {
    auto g = support::golden_fixture();
    const auto dc = g.set.lookup("Digital Cameras")->id, mc = g.set.lookup("Memory Cards")->id;
    EXPECT_EQ(g.table.freq(dc), 4u);
    EXPECT_EQ(g.table.cofreq(dc, mc), 2u);
    EXPECT_EQ(g.table.conf(dc, mc), 0.5);
}

TEST(GoldenFixture, MinFreqOmitsRareConcepts) {
    auto g = support::golden_fixture();
    EXPECT_EQ(g.lists.count(g.set.lookup("Camera Cases")->id), 0u);  // freq 2 < 3
    EXPECT_EQ(g.lists.size(), 4u);
    EXPECT_TRUE(build_ranked_lists(g.table, g.set, 3, 100).empty());
}

// Brute-force oracle: every partner with its count, sorted by conf desc then id.
TEST(RankedLists, AgreeWithExhaustiveSort) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        ConfidenceTable t;
        const std::size_t n = 8;
        std::uniform_int_distribution<int> coin(0, 2);
        for (int r = 0; r < 120; ++r) {
            ConceptId x = static_cast<ConceptId>(rng() % n);
            std::vector<ConceptId> partners;
            for (ConceptId y = 0; y < n; ++y)
                if (coin(rng) == 0) partners.push_back(y);
            t.add_record(x, partners);
        }
        ConceptSet set;
        for (std::size_t i = 0; i < n; ++i) set.intern("C" + std::to_string(i));
        set.freeze();
        auto lists = build_ranked_lists(t, set, 4, 1);
        for (ConceptId x = 0; x < n; ++x) {
            std::vector<std::pair<double, ConceptId>> all;
            for (ConceptId y = 0; y < n; ++y)
                if (t.cofreq(x, y) > 0) all.push_back({-static_cast<double>(t.cofreq(x, y)) / t.freq(x), y});
            std::sort(all.begin(), all.end());
            if (all.size() < 4) {
                EXPECT_EQ(lists.count(x), 0u);
                continue;
            }
            ASSERT_EQ(lists.count(x), 1u);
            for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(lists.at(x).targets[i].concept_id, all[i].second);
        }
    }
}

TEST(Splits, SizesFollowRatios) {
    std::vector<ConceptId> ids(100);
    std::iota(ids.begin(), ids.end(), 0);
    auto s = split_concepts(ids, {0.8, 0.1, 0.1}, 7);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.dev.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);

    std::vector<ConceptId> big(7084);
    std::iota(big.begin(), big.end(), 0);
    auto d = split_concepts(big, {}, 0);
    EXPECT_NEAR(static_cast<double>(d.train.size()), 5809, 1);
    EXPECT_NEAR(static_cast<double>(d.dev.size()), 425, 1);
    EXPECT_NEAR(static_cast<double>(d.test.size()), 850, 1);
}

TEST(Splits, DeterministicDisjointAndCovering) {
    std::vector<ConceptId> ids(57);
    std::iota(ids.begin(), ids.end(), 3);
    auto a = split_concepts(ids, {}, 5);
    auto b = split_concepts(ids, {}, 5);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::set<ConceptId> all;
    for (const auto* v : {&a.train, &a.dev, &a.test})
        for (auto x : *v) EXPECT_TRUE(all.insert(x).second);
    EXPECT_EQ(all, std::set<ConceptId>(ids.begin(), ids.end()));
    EXPECT_NE(split_concepts(ids, {}, 6).test, a.test);
}

TEST(Splits, RejectsTinyAndBadRatios) {
    EXPECT_THROW(split_concepts({1, 2}, {}, 0), DataError);
    EXPECT_THROW(split_concepts({1, 2, 3, 4}, {0.5, 0.5, 0.5}, 0), Error);
}

TEST(Dataset, SaveLoadRoundTrip) {
    auto d = support::golden_dataset();
    support::TempDir dir("ds");
    save_dataset(d, dir.file("d.json"));
    auto e = load_dataset(dir.file("d.json"));
    EXPECT_EQ(dataset_to_json(e), dataset_to_json(d));
    EXPECT_EQ(e.lists, d.lists);
    write_text_file(dir.file("bad.json"), R"({"schema":"ccgen.dataset","version":99})");
    EXPECT_THROW(load_dataset(dir.file("bad.json")), DataError);
}

TEST(Dataset, BuiltInvariants) {
    auto w = support::small_world(3);
    const auto& d = w.data;
    ASSERT_FALSE(d.lists.empty());
    for (const auto& [x, row] : d.table.rows())
        for (const auto& [y, n] : row) {
            EXPECT_GT(d.table.conf(x, y), 0.0);
            EXPECT_LE(d.table.conf(x, y), 1.0);
            EXPECT_LE(n, d.table.freq(x));
        }
    for (const auto& [x, l] : d.lists)
        for (std::size_t i = 1; i < l.targets.size(); ++i) {
            EXPECT_GE(l.targets[i - 1].confidence, l.targets[i].confidence);
            if (l.targets[i - 1].confidence == l.targets[i].confidence)
                EXPECT_LT(l.targets[i - 1].concept_id, l.targets[i].concept_id);
        }
    std::set<ConceptId> covered;
    for (const auto* v : {&d.splits.train, &d.splits.dev, &d.splits.test})
        for (auto x : *v) EXPECT_TRUE(covered.insert(x).second);
    std::set<ConceptId> listed;
    for (const auto& [x, l] : d.lists) listed.insert(x);
    EXPECT_EQ(covered, listed);
}

TEST(Synthetic, DeterministicUnderSeed) {
    SyntheticWorldSpec s;
    s.n_concepts = 30;
    s.n_categories = 5;
    s.baskets = 800;
    s.complement_graph_density = 0.4;
    s.vector_dim = 8;
    support::TempDir a("wa"), b("wb");
    write_synthetic_world(generate_synthetic_world(s), a.str(), {"h", 1});
    write_synthetic_world(generate_synthetic_world(s), b.str(), {"h", 1});
    for (auto f : {"concepts.txt", "catalog.jsonl", "behavior.jsonl", "vectors.txt", "graph.jsonl", "world.json"})
        EXPECT_EQ(read_text_file(a.file(f)), read_text_file(b.file(f))) << f;
}

TEST(Synthetic, RejectsInfeasibleSpecs) {
    SyntheticWorldSpec s;
    s.n_concepts = 60;
    s.complement_graph_density = 0.1;  // 6 neighbours < k_collect 10
    EXPECT_THROW(generate_synthetic_world(s), ConfigError);
    s.complement_graph_density = 0.3;
    s.noise_rate = 1.0;
    EXPECT_THROW(generate_synthetic_world(s), ConfigError);
    s.noise_rate = 0.1;
    s.baskets = 0;
    EXPECT_THROW(generate_synthetic_world(s), ConfigError);
}

TEST(Synthetic, NoiseFreeListsFollowTheGraph) {
    auto w = support::small_world(4, 40, 6000, 0.0);
    ASSERT_FALSE(w.data.lists.empty());
    for (const auto& [x, l] : w.data.lists)
        for (const auto& t : l.targets) EXPECT_TRUE(w.world.is_neighbor(x, t.concept_id));
}

TEST(Synthetic, VectorFileCoversEveryToken) {
    auto w = support::small_world(5);
    for (const auto& tok : w.world.tokens) EXPECT_NE(w.vectors.find(tok), nullptr) << tok;
    for (const auto& e : w.emb) EXPECT_EQ(e.coverage, 1.0);
}

TEST(Synthetic, GraphNeighboursDominateAtFullScale) {
    SyntheticWorldSpec s;  // 200 concepts, 50k baskets, noise 0.1
    auto w = generate_synthetic_world(s);
    auto d = build_dataset(w.concepts, w.catalog, w.behavior, {});
    ASSERT_GE(d.lists.size(), 150u);
    std::size_t dominated = 0;
    for (const auto& [x, l] : d.lists) {
        std::size_t nb = 0;
        for (const auto& t : l.targets) nb += w.is_neighbor(x, t.concept_id) ? 1 : 0;
        if (nb * 2 > l.targets.size()) ++dominated;
    }
    EXPECT_GE(static_cast<double>(dominated), 0.95 * static_cast<double>(d.lists.size()));
}

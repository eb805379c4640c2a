#include <gtest/gtest.h>

#include <sstream>

#include "ccgen/baselines.hpp"
#include "ccgen/interchange.hpp"
#include "support/test_support.hpp"

using namespace ccgen;

namespace {

std::vector<ConceptId> ids_of(const PredictionRecord& r) {
    std::vector<ConceptId> out;
    for (const auto& s : r.slots) out.push_back(*s.concept_id);
    return out;
}

void expect_well_formed(const PredictionRecord& r, std::size_t n) {
    EXPECT_EQ(r.slots.size(), n) << r.source;
    EXPECT_TRUE(validate_prediction_json(prediction_to_json(r)).empty()) << r.source;
    for (const auto& s : r.slots) {
        EXPECT_TRUE(s.valid());
        EXPECT_NE(s.concept_id, r.input_id);
    }
}

// Camera-world vectors: "camera" alone sits closest to Camera Lenses.
const char* kCameraVectors =
    "digital 0 0 1 0\ncameras 0 0 1 1\ncamera 1 0 0 0\nlenses 0.1 0 0 0\nbatteries 0 1 0 0\n"
    "memory 0 1 1 0\ncards 0 0 0 1\ncases 0.2 0 0 1\n";

}  // namespace

TEST(Glove, NearestByCosine) {
    auto g = support::golden_fixture();
    std::istringstream in(kCameraVectors);
    auto vec = read_word_vectors(in);
    auto emb = compose_all(g.set, vec);
    const auto cl = g.set.lookup("Camera Lenses")->id;
    auto r = glove_rank(cl, emb, g.set, 2);
    ASSERT_EQ(r.slots.size(), 2u);
    EXPECT_EQ(r.slots[0].text, "Camera Cases");
    EXPECT_EQ(r.source, "glove");
    EXPECT_EQ(r.raw_text.rfind("[SOS] Camera Lenses are purchased with 1) Camera Cases", 0), 0u);
    EmbeddingIndex short_emb(emb.begin(), emb.begin() + 2);
    EXPECT_THROW(glove_rank(cl, short_emb, g.set), DataError);
}

TEST(Knn, SingleNeighbourReproducesOwnList) {
    auto w = support::small_world(11);
    const auto& d = w.data;
    for (auto x : d.splits.train) {
        auto r = knn_rank(x, w.emb, d, d.splits.train, 1, 5);
        EXPECT_EQ(ids_of(r), d.list(x).top(5)) << d.concepts.at(x).surface;
    }
}

TEST(Knn, PooledCountsDominate) {
    auto w = support::small_world(12);
    const auto& d = w.data;
    const std::size_t k = 5;
    for (auto x : d.splits.test) {
        auto r = knn_rank(x, w.emb, d, d.splits.train, k, 5);
        expect_well_formed(r, 5);
        // independent pooling over the k nearest training concepts
        std::vector<std::pair<double, ConceptId>> sims;
        for (auto t : d.splits.train) sims.push_back({-cosine(w.emb[x].vector, w.emb[t].vector), t});
        std::sort(sims.begin(), sims.end());
        std::map<ConceptId, std::size_t> count;
        for (std::size_t i = 0; i < k; ++i)
            for (auto y : d.list(sims[i].second).top(5))
                if (y != x) ++count[y];
        if (count.size() < 5) continue;  // pool was widened
        const auto out = ids_of(r);
        for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(count[out[i - 1]], count[out[i]]);
        const std::size_t weakest = count[out.back()];
        for (const auto& [y, c] : count)
            if (c > weakest) EXPECT_NE(std::find(out.begin(), out.end(), y), out.end());
    }
}

TEST(Knn, Errors) {
    auto w = support::small_world(11);
    EXPECT_THROW(knn_rank(0, w.emb, w.data, {}, 3), DataError);
    EXPECT_THROW(knn_rank(0, w.emb, w.data, w.data.splits.train, 0), ConfigError);
}

TEST(PairSet, PositivesNegativesAndRatio) {
    auto w = support::small_world(13);
    const auto& d = w.data;
    auto p = build_pair_training_set(d, d.splits.train, 5, 3);
    EXPECT_EQ(p.positives.size(), 5 * d.splits.train.size());
    EXPECT_EQ(p.negatives.size(), 5 * p.positives.size());
    for (std::size_t i = 0; i < p.positives.size(); ++i) {
        const auto [x, y] = p.positives[i];
        const auto top = d.list(x).top(5);
        for (std::size_t r = 0; r < 5; ++r) {
            const auto [nx, ny] = p.negatives[i * 5 + r];
            EXPECT_EQ(nx, x);
            EXPECT_NE(ny, x);
            EXPECT_EQ(std::find(top.begin(), top.end(), ny), top.end());
        }
    }
    auto q = build_pair_training_set(d, d.splits.train, 5, 3);
    EXPECT_EQ(q.negatives, p.negatives);
    EXPECT_THROW(build_pair_training_set(d, {}, 5, 3), DataError);
}

TEST(PairScorer, SeparatesLinearlySeparableData) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::vector<LabeledPair> data;
    for (int i = 0; i < 300; ++i) {
        Vec f = {nd(rng), nd(rng), nd(rng)};
        const int label = f[0] + 0.5 * f[1] > 0 ? 1 : -1;
        f[0] += 0.3 * label;  // margin
        data.push_back({f, label});
    }
    auto m = train_linear_scorer(data, {50, 0.05, 1});
    std::size_t correct = 0;
    for (const auto& d : data) correct += (m.score(d.features) > 0) == (d.label > 0);
    EXPECT_EQ(correct, data.size());
    auto again = train_linear_scorer(data, {50, 0.05, 1});
    EXPECT_EQ(again.weights, m.weights);
    EXPECT_EQ(again.bias, m.bias);

    std::vector<LabeledPair> one = {{{1.0}, 1}, {{2.0}, 1}};
    EXPECT_THROW(train_linear_scorer(one, {}), DataError);
    EXPECT_THROW(train_linear_scorer({}, {}), DataError);
}

TEST(Item2Vec, ZeroEpochsMatchesGloveAndTrainingMovesContext) {
    auto w = support::small_world(14);
    const auto& d = w.data;
    auto pairs = build_pair_training_set(d, d.splits.train, 5, 1);
    auto frozen = train_item2vec_context(pairs, w.emb, {0, 0.05, 1});
    for (auto x : d.splits.test)
        EXPECT_EQ(ids_of(item2vec_rank(frozen, x, w.emb, d.concepts)), ids_of(glove_rank(x, w.emb, d.concepts)));

    auto trained = train_item2vec_context(pairs, w.emb, {5, 0.05, 1});
    // negative-sampling log-likelihood over all pairs
    auto objective = [&](const ContextEmbeddingTable& t) {
        double s = 0;
        for (auto [x, y] : pairs.positives) s += std::log(sigmoid(dot(w.emb[x].vector, t.context[y])));
        for (auto [x, y] : pairs.negatives) s += std::log(sigmoid(-dot(w.emb[x].vector, t.context[y])));
        return s;
    };
    EXPECT_GT(objective(trained), objective(frozen));
    expect_well_formed(item2vec_rank(trained, d.splits.test.front(), w.emb, d.concepts), 5);
}

TEST(Companion, IdentityIsGloveAndGradientIsCorrect) {
    auto w = support::small_world(15);
    const auto& d = w.data;
    auto pairs = build_pair_training_set(d, d.splits.train, 5, 1);
    auto id = train_companion(pairs, w.emb, {0, 0.01, 1});
    for (auto x : d.splits.test)
        EXPECT_EQ(ids_of(companion_rank(id, x, w.emb, d.concepts)), ids_of(glove_rank(x, w.emb, d.concepts)));

    // finite-difference check of the projection gradient
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    auto m = CompanionProjection::identity(4, 0.5);
    for (auto& v : m.p) v += 0.3 * nd(rng);
    Vec ex = {0.3, -1.0, 0.5, 0.8}, ey = {1.0, 0.2, -0.4, 0.1}, en = {0.2, -0.9, 0.7, 0.3};
    std::vector<double> grad(16, 0.0);
    ASSERT_GT(companion_loss(m, ex, ey, en, &grad), 0.0);
    for (std::size_t k = 0; k < 16; ++k) {
        auto up = m, down = m;
        up.p[k] += 1e-6;
        down.p[k] -= 1e-6;
        const double fd = (companion_loss(up, ex, ey, en, nullptr) - companion_loss(down, ex, ey, en, nullptr)) / 2e-6;
        EXPECT_NEAR(grad[k], fd, 1e-6);
    }
    // satisfied triplet: zero loss, untouched gradient
    std::vector<double> zero(16, 0.0);
    auto easy = CompanionProjection::identity(4, 0.1);
    EXPECT_EQ(companion_loss(easy, ex, ex, ey, &zero), 0.0);
    EXPECT_EQ(zero, std::vector<double>(16, 0.0));
    EXPECT_EQ(cosine_grad({0, 0, 0, 0}, ey), Vec(4, 0.0));
}

TEST(Companion, TrainingLowersTheTripletLoss) {
    auto w = support::small_world(16);
    auto pairs = build_pair_training_set(w.data, w.data.splits.train, 5, 1);
    auto total = [&](const CompanionProjection& m) {
        double s = 0;
        for (std::size_t i = 0; i < pairs.positives.size(); ++i)
            for (std::size_t r = 0; r < pairs.ratio; ++r) {
                auto [x, y] = pairs.positives[i];
                s += companion_loss(m, w.emb[x].vector, w.emb[y].vector,
                                    w.emb[pairs.negatives[i * pairs.ratio + r].second].vector, nullptr);
            }
        return s;
    };
    auto m0 = CompanionProjection::identity(w.emb[0].vector.size(), 0.2);
    auto m = train_companion(pairs, w.emb, {5, 0.01, 1});
    EXPECT_LT(total(m), total(m0));
    EXPECT_THROW(train_companion(pairs, w.emb, {1, 0.01, 1}, -1.0), ConfigError);
}

TEST(Baselines, EveryOutputHasNSlotsAndPassesSchema) {
    auto w = support::small_world(17);
    const auto& d = w.data;
    auto pairs = build_pair_training_set(d, d.splits.train, 5, 1);
    auto scorer = train_pair_scorer(pairs, w.emb, {2, 0.01, 1});
    auto ctx = train_item2vec_context(pairs, w.emb, {2, 0.05, 1});
    auto comp = train_companion(pairs, w.emb, {2, 0.01, 1});
    for (std::size_t n : {1, 5, 7})
        for (auto x : d.splits.test) {
            expect_well_formed(glove_rank(x, w.emb, d.concepts, n), n);
            expect_well_formed(knn_rank(x, w.emb, d, d.splits.train, 3, n), n);
            expect_well_formed(score_rank(scorer, x, w.emb, d.concepts, n), n);
            expect_well_formed(item2vec_rank(ctx, x, w.emb, d.concepts, n), n);
            expect_well_formed(companion_rank(comp, x, w.emb, d.concepts, n), n);
        }
}

TEST(Baselines, CheckpointsRoundTrip) {
    auto w = support::small_world(18);
    auto pairs = build_pair_training_set(w.data, w.data.splits.train, 2, 1);
    const Provenance prov{"h", 1};
    auto wrap = [&](const std::string& kind, json model) {
        auto j = baseline_header(kind, w.emb[0].vector.size(), 1, 2, prov);
        j["model"] = std::move(model);
        return j;
    };
    auto scorer = train_pair_scorer(pairs, w.emb, {2, 0.01, 1});
    auto s2 = pair_scorer_from_json(wrap("pair", to_json(scorer)));
    EXPECT_EQ(s2.weights, scorer.weights);
    EXPECT_EQ(s2.bias, scorer.bias);
    auto ctx = train_item2vec_context(pairs, w.emb, {2, 0.05, 1});
    EXPECT_EQ(item2vec_from_json(wrap("item2vec", to_json(ctx))).context, ctx.context);
    auto comp = train_companion(pairs, w.emb, {2, 0.01, 1});
    EXPECT_EQ(companion_from_json(wrap("companion", to_json(comp))).p, comp.p);
    EXPECT_THROW(companion_from_json(wrap("pair", to_json(comp))), DataError);
}

TEST(Ingest, RawGenerationsWithAndWithoutMapping) {
    auto g = support::golden_fixture();
    std::istringstream in(kCameraVectors);
    auto vec = read_word_vectors(in);
    support::TempDir dir("ingest");
    write_text_file(dir.file("gen.jsonl"),
                    R"({"input": "Digital Cameras", "text": "1) Camera Lense 2) Batteries 3) Flux Capacitors"})" "\n"
                    R"({"input": "Batteries", "text": "[SOS] Batteries are purchased with 1) Memory Cards [EOS]"})" "\n");
    IngestOptions off;
    auto raw = external_llm_ingest(dir.file("gen.jsonl"), g.set, nullptr, off);
    ASSERT_EQ(raw.size(), 2u);
    ASSERT_EQ(raw[0].slots.size(), 3u);
    EXPECT_FALSE(raw[0].slots[0].valid());
    EXPECT_EQ(raw[0].slots[0].text, "Camera Lense");
    EXPECT_TRUE(raw[0].slots[1].valid());
    EXPECT_EQ(raw[0].source, "external");
    EXPECT_EQ(raw[1].slots[0].text, "Memory Cards");

    IngestOptions on;
    on.map_to_set = true;
    auto mapped = external_llm_ingest(dir.file("gen.jsonl"), g.set, &vec, on);
    EXPECT_EQ(mapped[0].slots[0].text, "Camera Lenses");
    EXPECT_TRUE(mapped[0].slots[0].valid());
    EXPECT_FALSE(mapped[0].slots[2].valid());  // no known token
    EXPECT_THROW(external_llm_ingest(dir.file("gen.jsonl"), g.set, nullptr, on), ConfigError);

    write_text_file(dir.file("bad.jsonl"), R"({"text": "1) Batteries"})" "\n");
    EXPECT_THROW(external_llm_ingest(dir.file("bad.jsonl"), g.set, nullptr, off), DataError);
    auto rows = external_llm_ingest(support::fixture("golden20/predictions.jsonl"), g.set, nullptr, off);
    EXPECT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].source, "fixture");
}

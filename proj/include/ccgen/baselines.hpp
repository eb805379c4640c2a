#pragma once

// Comparison systems. Each ranks the closed concept set for an input concept
// and emits a PredictionRecord with exactly n slots.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/embed.hpp"
#include "ccgen/interchange.hpp"
#include "ccgen/io.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/serialize.hpp"

namespace ccgen {

/// Builds a record whose slots are the given in-set concepts, in order.
inline PredictionRecord ranked_record(const ConceptSet& set, ConceptId x, const std::vector<ConceptId>& ranked,
                                      const std::string& source, const Grammar& g = {}) {
    PredictionRecord r;
    r.input = set.at(x).surface;
    r.input_id = x;
    r.source = source;
    std::vector<std::string> surfaces;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        Slot s;
        s.position = static_cast<int>(i + 1);
        s.text = set.at(ranked[i]).surface;
        s.concept_id = ranked[i];
        surfaces.push_back(s.text);
        r.slots.push_back(std::move(s));
    }
    if (!surfaces.empty()) r.raw_text = encode_ordered(r.input, surfaces, g).text;
    return r;
}

/// Embedding of every concept, indexed by id.
using EmbeddingIndex = std::vector<ConceptEmbedding>;

inline void require_embeddings(const EmbeddingIndex& emb, const ConceptSet& set) {
    if (emb.size() != set.size()) throw DataError("embedding index does not cover the concept set");
}

/// Cosine of composed embeddings to compose(x), excluding x.
inline PredictionRecord glove_rank(ConceptId x, const EmbeddingIndex& emb, const ConceptSet& set, std::size_t n = 5) {
    require_embeddings(emb, set);
    return ranked_record(set, x, nearest_concepts(emb.at(x).vector, emb, n, x), "glove");
}

// ---------------------------------------------------------------------------
// KNN over training concepts

/// Pools the top lists of the k training concepts nearest to x. Ranking:
/// pooled count, then summed neighbour similarity, then best position in any
/// neighbour's list, then id. Pools smaller than n pull in further neighbours;
/// any remaining gap is filled by plain embedding similarity.
inline PredictionRecord knn_rank(ConceptId x, const EmbeddingIndex& emb, const Dataset& data,
                                 const std::vector<ConceptId>& train, std::size_t k_neighbors, std::size_t n = 5) {
    if (train.empty()) throw DataError("knn_rank needs a non-empty training split");
    if (k_neighbors == 0) throw ConfigError("k_neighbors must be >= 1", "baselines.knn.k");
    require_embeddings(emb, data.concepts);
    std::vector<ScoredId> sims;
    for (auto t : train) sims.push_back({t, cosine(emb.at(x).vector, emb.at(t).vector)});
    sims = top_by_score(std::move(sims), sims.size());

    struct Pooled {
        std::size_t count = 0;
        double sim = 0.0;
        std::size_t best_pos = std::numeric_limits<std::size_t>::max();
    };
    std::map<ConceptId, Pooled> pool;
    std::size_t used = 0;
    auto add_neighbor = [&](const ScoredId& nb) {
        const auto& targets = data.list(nb.concept_id).targets;
        for (std::size_t i = 0; i < targets.size() && i < data.target_size; ++i) {
            const ConceptId y = targets[i].concept_id;
            if (y == x) continue;
            auto& p = pool[y];
            ++p.count;
            p.sim += nb.score;
            p.best_pos = std::min(p.best_pos, i);
        }
    };
    for (; used < sims.size() && used < k_neighbors; ++used) add_neighbor(sims[used]);
    for (; pool.size() < n && used < sims.size(); ++used) add_neighbor(sims[used]);

    std::vector<std::pair<ConceptId, Pooled>> ranked(pool.begin(), pool.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        if (a.second.sim != b.second.sim) return a.second.sim > b.second.sim;
        if (a.second.best_pos != b.second.best_pos) return a.second.best_pos < b.second.best_pos;
        return a.first < b.first;
    });
    std::vector<ConceptId> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < n; ++i) out.push_back(ranked[i].first);
    if (out.size() < n) {
        for (auto c : nearest_concepts(emb.at(x).vector, emb, emb.size(), x)) {
            if (out.size() == n) break;
            if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
        }
    }
    return ranked_record(data.concepts, x, out, "knn");
}

// ---------------------------------------------------------------------------
// pair training data

using ConceptPair = std::pair<ConceptId, ConceptId>;

struct PairTrainingSet {
    std::vector<ConceptPair> positives;
    /// negatives[i * ratio .. (i+1) * ratio) were drawn for positives[i]
    std::vector<ConceptPair> negatives;
    std::size_t ratio = 5;
};

/// Positives: (x, y) for y in the top list of each training concept x.
/// Negatives: uniform over the concept set minus x and x's positives.
inline PairTrainingSet build_pair_training_set(const Dataset& data, const std::vector<ConceptId>& train,
                                               std::size_t ratio, std::uint64_t seed) {
    PairTrainingSet p;
    p.ratio = ratio;
    const auto universe = static_cast<ConceptId>(data.concepts.size());
    for (auto x : train) {
        auto pos = data.list(x).top(data.target_size);
        std::set<ConceptId> banned(pos.begin(), pos.end());
        banned.insert(x);
        std::vector<ConceptId> pool;
        for (ConceptId c = 0; c < universe; ++c)
            if (!banned.count(c)) pool.push_back(c);
        if (pool.empty() && ratio > 0) throw DataError("no negative candidates for '" + data.concepts.at(x).surface + "'");
        Rng rng = make_rng(seed, {x, 0x9a1});
        for (auto y : pos) {
            p.positives.emplace_back(x, y);
            for (std::size_t r = 0; r < ratio; ++r) p.negatives.emplace_back(x, pool[uniform_index(rng, pool.size())]);
        }
    }
    if (p.positives.empty()) throw DataError("pair training set is empty");
    return p;
}

struct SgdOptions {
    std::size_t epochs = 10;
    double lr = 0.01;
    std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// linear pair scorer (hinge loss)

struct LabeledPair {
    Vec features;
    int label = 1;  // +1 / -1
};

struct LinearPairScorer {
    Vec weights;
    double bias = 0.0;
    double l2 = 1e-4;

    double score(const Vec& f) const { return dot(weights, f) + bias; }
};

inline Vec concat(const Vec& a, const Vec& b) {
    Vec f(a);
    f.insert(f.end(), b.begin(), b.end());
    return f;
}

/// Stochastic subgradient descent on the L2-regularized hinge loss, from a
/// zero start.
inline LinearPairScorer train_linear_scorer(const std::vector<LabeledPair>& data, const SgdOptions& opt,
                                            double l2 = 1e-4) {
    if (data.empty()) throw DataError("no training pairs");
    bool pos = false, neg = false;
    for (const auto& d : data) (d.label > 0 ? pos : neg) = true;
    if (!pos || !neg) throw DataError("pair scorer needs both positive and negative examples");
    LinearPairScorer m;
    m.weights.assign(data.front().features.size(), 0.0);
    m.l2 = l2;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t e = 0; e < opt.epochs; ++e) {
        Rng rng = make_rng(opt.seed, {0x5c0, e});
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            const auto& d = data[i];
            const double margin = d.label * m.score(d.features);
            for (auto& w : m.weights) w *= 1.0 - opt.lr * l2;
            if (margin < 1.0) {
                for (std::size_t j = 0; j < m.weights.size(); ++j) m.weights[j] += opt.lr * d.label * d.features[j];
                m.bias += opt.lr * d.label;
            }
        }
    }
    return m;
}

inline LinearPairScorer train_pair_scorer(const PairTrainingSet& pairs, const EmbeddingIndex& emb,
                                          const SgdOptions& opt) {
    std::vector<LabeledPair> data;
    for (auto [x, y] : pairs.positives) data.push_back({concat(emb.at(x).vector, emb.at(y).vector), 1});
    for (auto [x, y] : pairs.negatives) data.push_back({concat(emb.at(x).vector, emb.at(y).vector), -1});
    return train_linear_scorer(data, opt);
}

inline PredictionRecord score_rank(const LinearPairScorer& m, ConceptId x, const EmbeddingIndex& emb,
                                   const ConceptSet& set, std::size_t n = 5) {
    require_embeddings(emb, set);
    std::vector<ScoredId> scored;
    for (const auto& e : emb)
        if (e.concept_id != x) scored.push_back({e.concept_id, m.score(concat(emb.at(x).vector, e.vector))});
    std::vector<ConceptId> out;
    for (const auto& s : top_by_score(std::move(scored), n)) out.push_back(s.concept_id);
    return ranked_record(set, x, out, "pair");
}

// ---------------------------------------------------------------------------
// item2vec-style context embeddings

/// Frozen targets are the composed embeddings; each candidate concept also
/// owns a learned context vector, initialized to its target vector.
struct ContextEmbeddingTable {
    std::vector<Vec> context;
};

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Negative-sampling objective: maximize log s(target(x) . context(y)) for
/// positives and log s(-target(x) . context(y')) for negatives.
inline ContextEmbeddingTable train_item2vec_context(const PairTrainingSet& pairs, const EmbeddingIndex& emb,
                                                    const SgdOptions& opt) {
    if (pairs.positives.empty()) throw DataError("no training pairs");
    ContextEmbeddingTable t;
    for (const auto& e : emb) t.context.push_back(e.vector);
    struct Item {
        ConceptPair p;
        double label;
    };
    std::vector<Item> items;
    for (auto p : pairs.positives) items.push_back({p, 1.0});
    for (auto p : pairs.negatives) items.push_back({p, 0.0});
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t e = 0; e < opt.epochs; ++e) {
        Rng rng = make_rng(opt.seed, {0x12e, e});
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            auto [x, y] = items[i].p;
            const Vec& tx = emb.at(x).vector;
            Vec& cy = t.context.at(y);
            const double g = items[i].label - sigmoid(dot(tx, cy));
            for (std::size_t j = 0; j < cy.size(); ++j) cy[j] += opt.lr * g * tx[j];
        }
    }
    return t;
}

inline PredictionRecord item2vec_rank(const ContextEmbeddingTable& t, ConceptId x, const EmbeddingIndex& emb,
                                      const ConceptSet& set, std::size_t n = 5) {
    require_embeddings(emb, set);
    std::vector<ScoredId> scored;
    for (const auto& e : emb)
        if (e.concept_id != x) scored.push_back({e.concept_id, cosine(emb.at(x).vector, t.context.at(e.concept_id))});
    std::vector<ConceptId> out;
    for (const auto& s : top_by_score(std::move(scored), n)) out.push_back(s.concept_id);
    return ranked_record(set, x, out, "item2vec");
}

// ---------------------------------------------------------------------------
// complement-space projection

struct CompanionProjection {
    std::size_t dim = 0;
    std::vector<double> p;  // row-major dim x dim
    double margin = 0.2;

    static CompanionProjection identity(std::size_t dim, double margin) {
        CompanionProjection m;
        m.dim = dim;
        m.margin = margin;
        m.p.assign(dim * dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) m.p[i * dim + i] = 1.0;
        return m;
    }

    Vec apply(const Vec& e) const {
        Vec u(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < dim; ++j) s += p[i * dim + j] * e[j];
            u[i] = s;
        }
        return u;
    }
};

/// d cos(u, v) / du
inline Vec cosine_grad(const Vec& u, const Vec& v) {
    Vec g(u.size(), 0.0);
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) return g;
    const double c = dot(u, v) / (nu * nv);
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
    return g;
}

/// Triplet hinge loss max(0, margin - cos(Px, y) + cos(Px, y')) and its
/// gradient with respect to P (accumulated into `grad` when non-null).
inline double companion_loss(const CompanionProjection& m, const Vec& ex, const Vec& ey, const Vec& eneg,
                             std::vector<double>* grad) {
    const Vec u = m.apply(ex);
    const double loss = m.margin - cosine(u, ey) + cosine(u, eneg);
    if (loss <= 0.0) return 0.0;
    if (grad) {
        const Vec gp = cosine_grad(u, ey), gn = cosine_grad(u, eneg);
        for (std::size_t i = 0; i < m.dim; ++i) {
            const double du = gn[i] - gp[i];
            if (du == 0.0) continue;
            for (std::size_t j = 0; j < m.dim; ++j) (*grad)[i * m.dim + j] += du * ex[j];
        }
    }
    return loss;
}

inline CompanionProjection train_companion(const PairTrainingSet& pairs, const EmbeddingIndex& emb,
                                           const SgdOptions& opt, double margin = 0.2) {
    if (pairs.positives.empty()) throw DataError("no training pairs");
    if (!(margin >= 0.0)) throw ConfigError("margin must be non-negative", "baselines.companion.margin");
    const std::size_t dim = emb.at(pairs.positives.front().first).vector.size();
    auto m = CompanionProjection::identity(dim, margin);
    std::vector<std::size_t> order(pairs.positives.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(dim * dim);
    for (std::size_t e = 0; e < opt.epochs; ++e) {
        Rng rng = make_rng(opt.seed, {0xc0a, e});
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            auto [x, y] = pairs.positives[i];
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0;
            for (std::size_t r = 0; r < pairs.ratio; ++r) {
                const ConceptId neg = pairs.negatives[i * pairs.ratio + r].second;
                loss += companion_loss(m, emb.at(x).vector, emb.at(y).vector, emb.at(neg).vector, &grad);
            }
            if (loss == 0.0) continue;
            for (std::size_t k = 0; k < grad.size(); ++k) m.p[k] -= opt.lr * grad[k];
        }
    }
    return m;
}

inline PredictionRecord companion_rank(const CompanionProjection& m, ConceptId x, const EmbeddingIndex& emb,
                                       const ConceptSet& set, std::size_t n = 5) {
    require_embeddings(emb, set);
    return ranked_record(set, x, nearest_concepts(m.apply(emb.at(x).vector), emb, n, x), "companion");
}

// ---------------------------------------------------------------------------
// checkpoints

inline json baseline_header(const std::string& kind, std::size_t dim, std::uint64_t seed, std::size_t epochs,
                            const Provenance& prov) {
    return {{"schema", "ccgen.baseline"}, {"version", 1},   {"kind", kind},
            {"dim", dim},                 {"seed", seed},   {"epochs", epochs},
            {"provenance", prov.to_json()}};
}

inline json to_json(const LinearPairScorer& m) { return {{"weights", m.weights}, {"bias", m.bias}, {"l2", m.l2}}; }
inline json to_json(const ContextEmbeddingTable& t) { return {{"context", t.context}}; }
inline json to_json(const CompanionProjection& m) { return {{"dim", m.dim}, {"p", m.p}, {"margin", m.margin}}; }

inline void check_baseline(const json& j, const std::string& kind) {
    if (j.value("schema", "") != "ccgen.baseline" || j.value("kind", "") != kind)
        throw DataError("checkpoint is not a '" + kind + "' baseline");
}

inline LinearPairScorer pair_scorer_from_json(const json& j) {
    check_baseline(j, "pair");
    LinearPairScorer m;
    m.weights = j.at("model").at("weights").get<Vec>();
    m.bias = j.at("model").at("bias").get<double>();
    m.l2 = j.at("model").at("l2").get<double>();
    return m;
}

inline ContextEmbeddingTable item2vec_from_json(const json& j) {
    check_baseline(j, "item2vec");
    return {j.at("model").at("context").get<std::vector<Vec>>()};
}

inline CompanionProjection companion_from_json(const json& j) {
    check_baseline(j, "companion");
    CompanionProjection m;
    m.dim = j.at("model").at("dim").get<std::size_t>();
    m.p = j.at("model").at("p").get<std::vector<double>>();
    m.margin = j.at("model").at("margin").get<double>();
    if (m.p.size() != m.dim * m.dim) throw DataError("companion projection has the wrong size");
    return m;
}

// ---------------------------------------------------------------------------
// external generations

struct IngestOptions {
    bool map_to_set = false;
    bool expect_explanations = false;
    MatchMode match = MatchMode::exact;
    Grammar grammar;
    std::string source = "external";
};

/// Replaces each invalid, non-empty slot by the concept nearest to its
/// composed text (the input concept excluded). Slots whose text has no
/// known token stay invalid.
inline void map_invalid_slots(PredictionRecord& r, const ConceptSet& set, const WordVectorTable& vectors,
                              const EmbeddingIndex& emb) {
    for (auto& s : r.slots) {
        if (s.valid() || s.text.empty()) continue;
        auto e = compose_text(s.text, vectors);
        if (e.coverage == 0.0) continue;
        auto near = nearest_concepts(e.vector, emb, 1, r.input_id);
        if (near.empty()) continue;
        s.concept_id = near.front();
        s.text = set.at(near.front()).surface;
    }
}

/// Reads a file of interchange records or of raw generations
/// ({"input": x, "text": generation}); raw text is decoded with the list
/// grammar, prepending the prompt head when the generation omits it.
inline std::vector<PredictionRecord> external_llm_ingest(const std::string& path, const ConceptSet& set,
                                                         const WordVectorTable* vectors, const IngestOptions& opt) {
    if (opt.map_to_set && !vectors) throw ConfigError("mapping to the concept set needs word vectors", "paths.vectors");
    EmbeddingIndex emb;
    if (opt.map_to_set) emb = compose_all(set, *vectors);
    DecodeOptions dopt{opt.grammar, opt.expect_explanations, opt.match, false};
    std::vector<PredictionRecord> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        if (j.contains("schema")) return;
        PredictionRecord r;
        try {
            if (j.contains("slots")) {
                r = prediction_from_json(j, set, opt.match);
            } else {
                if (!j.contains("text") || !j.at("text").is_string())
                    throw DataError("raw generation needs a string field 'text'");
                std::string text = j.at("text").get<std::string>();
                std::string input = j.contains("input") ? j.at("input").get<std::string>() : "";
                if (trim(text).substr(0, kSos.size()) != kSos) {
                    if (input.empty()) throw DataError("generation without prompt needs an 'input' field");
                    text = build_prefix_prompt(input, {}, opt.grammar).text + " " + std::string(trim(text));
                }
                r = decode_list(text, set, dopt);
                if (!input.empty()) {
                    r.input = normalize_surface(input);
                    const Concept* c = set.lookup(r.input, opt.match);
                    r.input_id = c ? std::optional<ConceptId>(c->id) : std::nullopt;
                }
                r.source = opt.source;
            }
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
        }
        if (opt.map_to_set) map_invalid_slots(r, set, *vectors, emb);
        out.push_back(std::move(r));
    });
    return out;
}

}  // namespace ccgen

#pragma once

// Synthetic worlds for desk-scale runs. Concepts are "<Modifier> <Noun>"
// pairs; the noun names a category. Complementarity is planted between
// categories from different groups, while word vectors cluster nouns by group,
// so embedding similarity finds look-alikes rather than complements.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/io.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

struct SyntheticWorldSpec {
    std::size_t n_concepts = 200;
    std::size_t n_categories = 20;
    std::size_t baskets = 50000;
    double complement_graph_density = 0.1;  // neighbours per concept / (n_concepts - 1)
    double noise_rate = 0.1;
    std::uint64_t seed = 1;

    std::size_t k_collect = 10;
    std::size_t vector_dim = 100;
    std::size_t products_per_concept = 3;
    std::size_t max_also_buy = 4;
    std::size_t complement_categories = 3;

    json to_json() const {
        return {{"n_concepts", n_concepts},
                {"n_categories", n_categories},
                {"baskets", baskets},
                {"complement_graph_density", complement_graph_density},
                {"noise_rate", noise_rate},
                {"seed", seed},
                {"k_collect", k_collect},
                {"vector_dim", vector_dim},
                {"products_per_concept", products_per_concept},
                {"max_also_buy", max_also_buy},
                {"complement_categories", complement_categories}};
    }
};

struct SyntheticWorld {
    SyntheticWorldSpec spec;
    ConceptSet concepts;
    std::vector<std::size_t> category_of;
    std::vector<CatalogEntry> catalog;
    std::vector<BehaviorRecord> behavior;
    /// Latent complement graph: neighbours of each concept, strongest first.
    std::vector<std::vector<ScoredConcept>> graph;
    std::vector<std::string> tokens;  // manifest of every token in the vector file
    std::string vectors_text;

    bool is_neighbor(ConceptId x, ConceptId y) const {
        for (const auto& n : graph[x])
            if (n.concept_id == y) return true;
        return false;
    }
};

namespace detail {

inline std::string pseudo_word(Rng& rng, std::size_t syllables) {
    static constexpr std::string_view cons = "bdfgklmnprstvz";
    static constexpr std::string_view vow = "aeiou";
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += cons[uniform_index(rng, cons.size())];
        w += vow[uniform_index(rng, vow.size())];
    }
    w += cons[uniform_index(rng, cons.size())];
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

inline std::vector<std::string> unique_words(Rng& rng, std::size_t n, std::set<std::string>& used) {
    std::vector<std::string> out;
    while (out.size() < n) {
        auto w = pseudo_word(rng, 2 + uniform_index(rng, 2));
        if (used.insert(to_lower(w)).second) out.push_back(w);
    }
    return out;
}

inline void validate(const SyntheticWorldSpec& s) {
    if (s.n_concepts == 0 || s.n_categories == 0 || s.baskets == 0 || s.vector_dim == 0 || s.k_collect == 0 ||
        s.products_per_concept == 0 || s.max_also_buy == 0 || s.complement_categories == 0)
        throw ConfigError("synthetic world counts must be positive", "synth");
    if (!(s.noise_rate >= 0.0 && s.noise_rate < 1.0)) throw ConfigError("noise_rate must be in [0,1)", "synth.noise_rate");
    if (s.n_categories < 2 || s.n_categories > s.n_concepts)
        throw ConfigError("need 2 <= n_categories <= n_concepts", "synth.n_categories");
    if (!(s.complement_graph_density > 0.0 && s.complement_graph_density <= 1.0))
        throw ConfigError("complement_graph_density must be in (0,1]", "synth.complement_graph_density");
}

}  // namespace detail

inline SyntheticWorld generate_synthetic_world(const SyntheticWorldSpec& spec) {
    detail::validate(spec);
    const std::size_t n = spec.n_concepts;
    const std::size_t C = spec.n_categories;
    const std::size_t per_cat = (n + C - 1) / C;
    const auto m = static_cast<std::size_t>(std::lround(spec.complement_graph_density * static_cast<double>(n - 1)));
    if (m < spec.k_collect)
        throw ConfigError("complement_graph_density gives " + std::to_string(m) + " neighbours per concept, fewer than k_collect=" +
                              std::to_string(spec.k_collect),
                          "synth.complement_graph_density");

    Rng rng = make_rng(spec.seed, {0x5e7d});
    SyntheticWorld w;
    w.spec = spec;

    // vocabulary
    std::set<std::string> used;
    auto nouns = detail::unique_words(rng, C, used);
    auto mods = detail::unique_words(rng, per_cat, used);
    const std::size_t G = std::max<std::size_t>(2, C / 4);
    auto group_names = detail::unique_words(rng, G, used);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % C;
        w.concepts.intern(mods[i / C] + " " + nouns[c]);
        w.category_of.push_back(c);
    }
    w.concepts.freeze();
    auto group_of = [&](std::size_t c) { return c % G; };

    // complementary categories come from other groups; affinity decays with rank
    const std::size_t r_needed = std::max(spec.complement_categories, (m + per_cat - 1) / per_cat);
    std::vector<std::vector<std::pair<std::size_t, double>>> comp(C);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<std::size_t> others;
        for (std::size_t o = 0; o < C; ++o)
            if (group_of(o) != group_of(c)) others.push_back(o);
        if (others.size() < r_needed)
            for (std::size_t o = 0; o < C; ++o)
                if (o != c && group_of(o) == group_of(c)) others.push_back(o);
        std::shuffle(others.begin(), others.end(), rng);
        for (std::size_t j = 0; j < std::min(r_needed, others.size()); ++j)
            comp[c].push_back({others[j], 1.0 - 0.15 * static_cast<double>(j)});
    }

    std::lognormal_distribution<double> pop_dist(0.0, 0.35), jitter_dist(0.0, 0.25);
    std::vector<double> pop(n), src_weight(n);
    for (auto& p : pop) p = pop_dist(rng);
    for (auto& s : src_weight) s = uniform_real(rng, 0.3, 1.7);

    w.graph.resize(n);
    for (ConceptId x = 0; x < n; ++x) {
        std::vector<ScoredConcept> cand;
        for (ConceptId y = 0; y < n; ++y) {
            if (y == x) continue;
            for (const auto& [cc, a] : comp[w.category_of[x]])
                if (cc == w.category_of[y]) cand.push_back({y, a * pop[y] * jitter_dist(rng)});
        }
        if (cand.size() < m)
            throw ConfigError("synthetic spec infeasible: only " + std::to_string(cand.size()) +
                                  " complement candidates for " + std::to_string(m) + " neighbours",
                              "synth.complement_graph_density");
        std::stable_sort(cand.begin(), cand.end(),
                         [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
        cand.resize(m);
        w.graph[x] = std::move(cand);
    }

    // catalog: several products per concept, leaf category below the concept
    std::vector<std::vector<std::string>> products(n);
    for (ConceptId x = 0; x < n; ++x) {
        const auto& surface = w.concepts[x].surface;
        for (std::size_t p = 0; p < spec.products_per_concept; ++p) {
            char id[32];
            std::snprintf(id, sizeof id, "P%05u%02zu", x, p);
            products[x].push_back(id);
            w.catalog.push_back(
                {id, {"Synthetic Store", "Group " + group_names[group_of(w.category_of[x])], surface, surface + " Kit"}});
        }
    }

    // baskets
    std::discrete_distribution<std::size_t> pick_source(src_weight.begin(), src_weight.end());
    std::vector<std::discrete_distribution<std::size_t>> pick_neighbor;
    for (ConceptId x = 0; x < n; ++x) {
        std::vector<double> wts;
        for (const auto& nb : w.graph[x]) wts.push_back(nb.confidence);
        pick_neighbor.emplace_back(wts.begin(), wts.end());
    }
    w.behavior.reserve(spec.baskets);
    for (std::size_t b = 0; b < spec.baskets; ++b) {
        const auto x = static_cast<ConceptId>(pick_source(rng));
        BehaviorRecord rec;
        rec.product_id = products[x][uniform_index(rng, products[x].size())];
        const std::size_t len = 1 + uniform_index(rng, spec.max_also_buy);
        for (std::size_t i = 0; i < len; ++i) {
            ConceptId y;
            if (uniform_real(rng, 0.0, 1.0) < spec.noise_rate) {
                y = static_cast<ConceptId>(uniform_index(rng, n - 1));
                if (y >= x) ++y;
            } else {
                y = w.graph[x][pick_neighbor[x](rng)].concept_id;
            }
            rec.also_buy.push_back(products[y][uniform_index(rng, products[y].size())]);
        }
        w.behavior.push_back(std::move(rec));
    }

    // word vectors: nouns cluster around their group centroid
    const std::size_t d = spec.vector_dim;
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double unit = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<std::vector<double>> centroid(G, std::vector<double>(d));
    for (auto& v : centroid) {
        double norm = 0;
        for (auto& e : v) {
            e = gauss(rng);
            norm += e * e;
        }
        for (auto& e : v) e /= std::sqrt(norm);
    }
    auto emit = [&](const std::string& token, const std::vector<double>& v) {
        w.tokens.push_back(to_lower(token));
        w.vectors_text += to_lower(token);
        char buf[32];
        for (double e : v) {
            std::snprintf(buf, sizeof buf, " %.6f", e);
            w.vectors_text += buf;
        }
        w.vectors_text += '\n';
    };
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = 0.8 * centroid[group_of(c)][i] + 0.6 * unit * gauss(rng);
        emit(nouns[c], v);
    }
    for (const auto& mword : mods) {
        std::vector<double> v(d);
        for (auto& e : v) e = 0.5 * unit * gauss(rng);
        emit(mword, v);
    }
    return w;
}

/// Writes concepts.txt, catalog.jsonl, behavior.jsonl, vectors.txt,
/// tokens.txt, graph.jsonl and world.json into `dir`.
inline void write_synthetic_world(const SyntheticWorld& w, const std::string& dir, const Provenance& prov) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const json header = {{"schema", "ccgen.synthetic"}, {"version", 1}, {"provenance", prov.to_json()}};

    std::string concepts = "# synthetic concept set; config " + prov.config_hash + " seed " + std::to_string(prov.seed) + "\n";
    for (const auto& c : w.concepts) concepts += c.surface + "\n";
    write_text_file(dir + "/concepts.txt", concepts);

    std::string catalog = header.dump() + "\n";
    for (const auto& e : w.catalog) catalog += json{{"product_id", e.product_id}, {"category", e.category_path}}.dump() + "\n";
    write_text_file(dir + "/catalog.jsonl", catalog);

    std::string behavior = header.dump() + "\n";
    for (const auto& r : w.behavior) behavior += json{{"product_id", r.product_id}, {"also_buy", r.also_buy}}.dump() + "\n";
    write_text_file(dir + "/behavior.jsonl", behavior);

    write_text_file(dir + "/vectors.txt", w.vectors_text);
    write_text_file(dir + "/tokens.txt", join(w.tokens, "\n") + "\n");

    std::string graph = header.dump() + "\n";
    for (ConceptId x = 0; x < w.graph.size(); ++x) {
        json nb = json::array();
        for (const auto& s : w.graph[x]) nb.push_back({{"y", w.concepts[s.concept_id].surface}, {"weight", s.confidence}});
        graph += json{{"x", w.concepts[x].surface}, {"neighbors", nb}}.dump() + "\n";
    }
    write_text_file(dir + "/graph.jsonl", graph);

    json world = header;
    world["spec"] = w.spec.to_json();
    write_text_file(dir + "/world.json", world.dump(1) + "\n");
}

}  // namespace ccgen

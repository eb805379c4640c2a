#pragma once

// Dataset construction from a product catalog plus co-purchase logs:
// product -> concept mapping, co-purchase confidence, top-k lists, splits.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/io.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/serialize.hpp"

namespace ccgen {

inline constexpr int kDatasetSchemaVersion = 1;

struct CatalogEntry {
    std::string product_id;
    std::vector<std::string> category_path;  // root -> leaf
};

struct BehaviorRecord {
    std::string product_id;
    std::vector<std::string> also_buy;
};

inline std::string product_id_of(const json& j) {
    if (j.contains("product_id")) return j.at("product_id").get<std::string>();
    if (j.contains("asin")) return j.at("asin").get<std::string>();
    throw DataError("record has no product_id");
}

inline std::vector<CatalogEntry> read_catalog(const std::string& path) {
    std::vector<CatalogEntry> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        if (j.contains("schema")) return;
        try {
            CatalogEntry e{product_id_of(j), j.at("category").get<std::vector<std::string>>()};
            if (e.category_path.empty()) throw DataError("empty category path");
            out.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw DataError(path + ":" + std::to_string(line) + ": " + ex.what());
        }
    });
    return out;
}

inline std::vector<BehaviorRecord> read_behavior(const std::string& path) {
    std::vector<BehaviorRecord> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        if (j.contains("schema")) return;
        try {
            BehaviorRecord r{product_id_of(j), {}};
            if (j.contains("also_buy")) r.also_buy = j.at("also_buy").get<std::vector<std::string>>();
            out.push_back(std::move(r));
        } catch (const std::exception& ex) {
            throw DataError(path + ":" + std::to_string(line) + ": " + ex.what());
        }
    });
    return out;
}

/// Deepest element of the category path that belongs to the concept set.
inline const Concept* map_product_to_concept(const CatalogEntry& entry, const ConceptSet& set) {
    for (auto it = entry.category_path.rbegin(); it != entry.category_path.rend(); ++it)
        if (const Concept* c = set.lookup(*it)) return c;
    return nullptr;
}

inline bool filter_concept_by_tokens(std::string_view surface, int max_tokens = 6) {
    return count_tokens(surface) <= max_tokens;
}

/// Drops concepts longer than `max_tokens` and rejects surfaces the list
/// grammar cannot carry. Returns a fresh, frozen set (ids are renumbered).
inline ConceptSet prepare_concept_set(const ConceptSet& raw, int max_tokens = 6) {
    ConceptSet out;
    for (const auto& c : raw) {
        if (!filter_concept_by_tokens(c.surface, max_tokens)) continue;
        if (auto why = grammar_violation(c.surface))
            throw DataError("concept '" + c.surface + "' " + *why, "concepts");
        out.intern(c.surface);
    }
    out.freeze();
    return out;
}

// ---------------------------------------------------------------------------

/// freq(x): behavior records whose source product maps to x.
/// cofreq(x, y): records with source x listing at least one product of y.
class ConfidenceTable {
public:
    using Row = std::map<ConceptId, std::uint64_t>;

    void add_record(ConceptId source, std::vector<ConceptId> partners) {
        ++freq_[source];
        std::sort(partners.begin(), partners.end());
        partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
        for (auto y : partners)
            if (y != source) ++cofreq_[source][y];
    }

    /// Count maps are additive, so shards can be built apart and merged.
    void merge(const ConfidenceTable& other) {
        for (const auto& [x, n] : other.freq_) freq_[x] += n;
        for (const auto& [x, row] : other.cofreq_)
            for (const auto& [y, n] : row) cofreq_[x][y] += n;
    }

    std::uint64_t freq(ConceptId x) const {
        auto it = freq_.find(x);
        return it == freq_.end() ? 0 : it->second;
    }

    std::uint64_t cofreq(ConceptId x, ConceptId y) const {
        auto it = cofreq_.find(x);
        if (it == cofreq_.end()) return 0;
        auto jt = it->second.find(y);
        return jt == it->second.end() ? 0 : jt->second;
    }

    double conf(ConceptId x, ConceptId y) const {
        auto f = freq(x);
        return f == 0 ? 0.0 : static_cast<double>(cofreq(x, y)) / static_cast<double>(f);
    }

    const Row& row(ConceptId x) const {
        static const Row empty;
        auto it = cofreq_.find(x);
        return it == cofreq_.end() ? empty : it->second;
    }

    const std::map<ConceptId, std::uint64_t>& freqs() const noexcept { return freq_; }
    const std::map<ConceptId, Row>& rows() const noexcept { return cofreq_; }
    bool empty() const noexcept { return freq_.empty(); }

    /// Keeps only rows whose source is in `keep`.
    ConfidenceTable restricted_to(const std::vector<ConceptId>& keep) const {
        ConfidenceTable t;
        for (auto x : keep) {
            if (auto it = freq_.find(x); it != freq_.end()) t.freq_[x] = it->second;
            if (auto it = cofreq_.find(x); it != cofreq_.end()) t.cofreq_[x] = it->second;
        }
        return t;
    }

    json to_json() const {
        json rows = json::array();
        for (const auto& [x, f] : freq_) {
            json partners = json::array();
            for (const auto& [y, n] : row(x)) partners.push_back({y, n});
            rows.push_back({{"x", x}, {"freq", f}, {"cofreq", partners}});
        }
        return rows;
    }

    static ConfidenceTable from_json(const json& j) {
        ConfidenceTable t;
        for (const auto& r : j) {
            auto x = r.at("x").get<ConceptId>();
            t.freq_[x] = r.at("freq").get<std::uint64_t>();
            for (const auto& p : r.at("cofreq")) t.cofreq_[x][p.at(0).get<ConceptId>()] = p.at(1).get<std::uint64_t>();
        }
        return t;
    }

private:
    std::map<ConceptId, std::uint64_t> freq_;
    std::map<ConceptId, Row> cofreq_;
};

inline ConfidenceTable build_confidence_table(const std::vector<CatalogEntry>& catalog,
                                              const std::vector<BehaviorRecord>& behavior, const ConceptSet& set) {
    std::unordered_map<std::string, ConceptId> product_concept;
    for (const auto& e : catalog)
        if (const Concept* c = map_product_to_concept(e, set)) product_concept.emplace(e.product_id, c->id);

    ConfidenceTable table;
    for (const auto& r : behavior) {
        auto src = product_concept.find(r.product_id);
        if (src == product_concept.end()) continue;
        std::vector<ConceptId> partners;
        for (const auto& p : r.also_buy)
            if (auto it = product_concept.find(p); it != product_concept.end()) partners.push_back(it->second);
        table.add_record(src->second, std::move(partners));
    }
    return table;
}

/// Partners of x ordered by confidence descending, ties by ascending id.
inline std::vector<ScoredConcept> sorted_partners(const ConfidenceTable& table, ConceptId x) {
    const auto& row = table.row(x);
    std::vector<std::pair<ConceptId, std::uint64_t>> v(row.begin(), row.end());
    // same denominator within a row, so integer counts order exactly
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<ScoredConcept> out;
    out.reserve(v.size());
    for (const auto& [y, n] : v) out.push_back({y, table.conf(x, y)});
    return out;
}

inline std::map<ConceptId, RankedList> build_ranked_lists(const ConfidenceTable& table, const ConceptSet& set,
                                                          std::size_t k_collect = 10, std::uint64_t min_freq = 20) {
    std::map<ConceptId, RankedList> lists;
    for (const auto& c : set) {
        if (table.freq(c.id) < min_freq) continue;
        auto partners = sorted_partners(table, c.id);
        if (partners.size() < k_collect) continue;
        partners.resize(k_collect);
        lists.emplace(c.id, RankedList{c.id, std::move(partners)});
    }
    return lists;
}

// ---------------------------------------------------------------------------

struct SplitRatios {
    double train = 0.82;
    double dev = 0.06;
    double test = 0.12;
};

struct Splits {
    std::vector<ConceptId> train, dev, test;
};

/// Seeded shuffle of the listed concepts, then dev and test take
/// floor(n * ratio) each and the remainder goes to train.
inline Splits split_concepts(std::vector<ConceptId> ids, SplitRatios r, std::uint64_t seed) {
    if (ids.size() < 3) throw DataError("need at least 3 listed concepts to split, got " + std::to_string(ids.size()));
    if (r.train < 0 || r.dev < 0 || r.test < 0 || std::abs(r.train + r.dev + r.test - 1.0) > 1e-6)
        throw ConfigError("split ratios must be non-negative and sum to 1", "dataset.split");
    std::sort(ids.begin(), ids.end());
    Rng rng = make_rng(seed, {0x5b17});
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n = static_cast<double>(ids.size());
    const auto n_dev = static_cast<std::size_t>(std::floor(n * r.dev + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(n * r.test + 1e-9));
    Splits s;
    s.dev.assign(ids.begin(), ids.begin() + n_dev);
    s.test.assign(ids.begin() + n_dev, ids.begin() + n_dev + n_test);
    s.train.assign(ids.begin() + n_dev + n_test, ids.end());
    for (auto* v : {&s.train, &s.dev, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

struct Dataset {
    ConceptSet concepts;
    std::map<ConceptId, RankedList> lists;
    Splits splits;
    ConfidenceTable table;  // rows for listed concepts only
    std::size_t target_size = 5;
    std::size_t k_collect = 10;
    Provenance provenance;

    const RankedList& list(ConceptId x) const {
        auto it = lists.find(x);
        if (it == lists.end()) throw DataError("no ranked list for concept '" + concepts.at(x).surface + "'");
        return it->second;
    }

    const std::vector<ConceptId>& split(std::string_view name) const {
        if (name == "train") return splits.train;
        if (name == "dev") return splits.dev;
        if (name == "test") return splits.test;
        throw ConfigError("unknown split '" + std::string(name) + "'", "split");
    }

    std::vector<std::string> surfaces(const std::vector<ConceptId>& ids) const {
        std::vector<std::string> out;
        for (auto id : ids) out.push_back(concepts.at(id).surface);
        return out;
    }

    /// Target surfaces (first target_size entries) of x's list.
    std::vector<std::string> target_surfaces(ConceptId x) const { return surfaces(list(x).top(target_size)); }
};

inline Dataset split_dataset(ConceptSet concepts, std::map<ConceptId, RankedList> lists, const ConfidenceTable& table,
                             SplitRatios ratios, std::uint64_t seed, std::size_t target_size = 5) {
    for (const auto& [x, l] : lists)
        if (l.targets.size() < target_size)
            throw DataError("list for '" + concepts.at(x).surface + "' is shorter than the target size");
    std::vector<ConceptId> ids;
    for (const auto& [x, l] : lists) ids.push_back(x);
    Dataset d;
    d.splits = split_concepts(ids, ratios, seed);
    d.table = table.restricted_to(ids);
    d.concepts = std::move(concepts);
    d.lists = std::move(lists);
    d.target_size = target_size;
    d.k_collect = d.lists.empty() ? 0 : d.lists.begin()->second.targets.size();
    d.provenance.seed = seed;
    return d;
}

struct DatasetBuildOptions {
    std::size_t k_collect = 10;
    std::uint64_t min_freq = 20;
    std::size_t target_size = 5;
    int max_tokens = 6;
    SplitRatios ratios;
    std::uint64_t seed = 0;
};

/// Full pipeline: filter concepts, build the table, rank, split.
inline Dataset build_dataset(const ConceptSet& raw_concepts, const std::vector<CatalogEntry>& catalog,
                             const std::vector<BehaviorRecord>& behavior, const DatasetBuildOptions& opt) {
    if (opt.k_collect < opt.target_size) throw ConfigError("k_collect must be >= list size", "dataset.k_collect");
    auto set = prepare_concept_set(raw_concepts, opt.max_tokens);
    auto table = build_confidence_table(catalog, behavior, set);
    auto lists = build_ranked_lists(table, set, opt.k_collect, opt.min_freq);
    return split_dataset(std::move(set), std::move(lists), table, opt.ratios, opt.seed, opt.target_size);
}

// ---------------------------------------------------------------------------
// persistence

inline json dataset_to_json(const Dataset& d) {
    json concepts = json::array();
    for (const auto& c : d.concepts) concepts.push_back(c.surface);
    json lists = json::array();
    for (const auto& [x, l] : d.lists) {
        json targets = json::array();
        for (const auto& t : l.targets) targets.push_back({t.concept_id, t.confidence});
        lists.push_back({{"x", x}, {"targets", targets}});
    }
    return {{"schema", "ccgen.dataset"},
            {"version", kDatasetSchemaVersion},
            {"provenance", d.provenance.to_json()},
            {"target_size", d.target_size},
            {"k_collect", d.k_collect},
            {"concepts", concepts},
            {"splits", {{"train", d.splits.train}, {"dev", d.splits.dev}, {"test", d.splits.test}}},
            {"lists", lists},
            {"table", d.table.to_json()}};
}

inline Dataset dataset_from_json(const json& j) {
    if (j.value("schema", "") != "ccgen.dataset") throw DataError("not a dataset file (schema field)");
    if (j.value("version", 0) != kDatasetSchemaVersion)
        throw DataError("unsupported dataset version " + std::to_string(j.value("version", 0)));
    Dataset d;
    try {
        for (const auto& s : j.at("concepts")) d.concepts.intern(s.get<std::string>());
        d.concepts.freeze();
        d.target_size = j.at("target_size").get<std::size_t>();
        d.k_collect = j.at("k_collect").get<std::size_t>();
        d.provenance = Provenance::from_json(j.at("provenance"));
        const auto& sp = j.at("splits");
        d.splits.train = sp.at("train").get<std::vector<ConceptId>>();
        d.splits.dev = sp.at("dev").get<std::vector<ConceptId>>();
        d.splits.test = sp.at("test").get<std::vector<ConceptId>>();
        for (const auto& l : j.at("lists")) {
            RankedList rl;
            rl.input = l.at("x").get<ConceptId>();
            for (const auto& t : l.at("targets")) rl.targets.push_back({t.at(0).get<ConceptId>(), t.at(1).get<double>()});
            d.lists.emplace(rl.input, std::move(rl));
        }
        d.table = ConfidenceTable::from_json(j.at("table"));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed dataset file: ") + e.what());
    }
    return d;
}

inline void save_dataset(const Dataset& d, const std::string& path) { write_text_file(path, dataset_to_json(d).dump(1) + "\n"); }

inline Dataset load_dataset(const std::string& path) { return dataset_from_json(read_json_file(path)); }

/// Stable text rendering of a table and its lists (golden-file format).
inline std::string canonical_table_text(const ConfidenceTable& table, const std::map<ConceptId, RankedList>& lists,
                                        const ConceptSet& set) {
    std::string out;
    for (const auto& [x, f] : table.freqs()) out += "freq\t" + set.at(x).surface + "\t" + std::to_string(f) + "\n";
    for (const auto& [x, row] : table.rows())
        for (const auto& [y, n] : row)
            out += "cofreq\t" + set.at(x).surface + "\t" + set.at(y).surface + "\t" + std::to_string(n) + "\t" +
                   fixed6(table.conf(x, y)) + "\n";
    for (const auto& [x, l] : lists)
        for (std::size_t i = 0; i < l.targets.size(); ++i)
            out += "list\t" + set.at(x).surface + "\t" + std::to_string(i + 1) + "\t" +
                   set.at(l.targets[i].concept_id).surface + "\t" + fixed6(l.targets[i].confidence) + "\n";
    return out;
}

}  // namespace ccgen

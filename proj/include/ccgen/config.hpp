#pragma once

// Run configuration: a JSON document layered as defaults < config file <
// command-line overrides. Unknown keys and type mismatches are rejected with
// the dotted path of the offending field.

#include <string>
#include <vector>

#include "ccgen/baselines.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/explain.hpp"
#include "ccgen/io.hpp"
#include "ccgen/lm_pipeline.hpp"
#include "ccgen/synth.hpp"

namespace ccgen {

inline json default_config() {
    auto phase = [](std::size_t epochs, double lr, std::size_t decay_after, double decay) {
        return json{{"epochs", epochs}, {"lr", lr}, {"decay_after", decay_after}, {"decay", decay}, {"batch_size", 8}};
    };
    return {
        {"paths", {{"concepts", ""}, {"catalog", ""}, {"behavior", ""}, {"vectors", ""}, {"workdir", "."}}},
        {"dataset",
         {{"min_freq", 20},
          {"k_collect", 10},
          {"list_size", 5},
          {"max_tokens", 6},
          {"split", {0.82, 0.06, 0.12}},
          {"seed", 0}}},
        {"grammar", {{"relation", "are purchased with"}}},
        {"decode", {{"case_insensitive", false}}},
        {"embed", {{"lowercase", true}}},
        {"model",
         {{"d", 32},
          {"H", 128},
          {"h", 9},
          {"beam", 5},
          {"permutations", 10},
          {"max_len", 48},
          {"max_len_explained", 200},
          {"no_repeat_concept", false},
          {"seed", 1},
          {"unordered", phase(8, 0.05, 4, 0.8)},
          {"ordered", phase(30, 0.05, 15, 0.9)}}},
        {"baselines",
         {{"epochs", 10},
          {"lr", 0.05},
          {"pair_lr", 0.01},
          {"negatives", 5},
          {"knn_k", 5},
          {"margin", 0.2},
          {"list_size", 5},
          {"seed", 1}}},
        {"teacher",
         {{"url", ""},
          {"path", "/v1/completions"},
          {"token_env", "CCGEN_TEACHER_TOKEN"},
          {"timeout_s", 30.0},
          {"max_retries", 2},
          {"max_in_flight", 4},
          {"max_tokens", 64},
          {"temperature", 0.0},
          {"id", "http"}}},
        {"eval", {{"k", 10}, {"buckets", {50, 200, 1000}}}},
        {"synth",
         {{"n_concepts", 200},
          {"n_categories", 20},
          {"baskets", 50000},
          {"complement_graph_density", 0.1},
          {"noise_rate", 0.1},
          {"seed", 1},
          {"k_collect", 10},
          {"vector_dim", 100},
          {"products_per_concept", 3},
          {"max_also_buy", 4},
          {"complement_categories", 3}}}};
}

namespace detail {

inline bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) {
        // integers may not silently become fractions
        return !(a.is_number_integer() && b.is_number_float() && b.get<double>() != std::floor(b.get<double>()));
    }
    return a.type() == b.type();
}

inline void merge_into(json& base, const json& over, const std::string& path) {
    if (!over.is_object()) throw ConfigError("expected an object", path.empty() ? "<root>" : path);
    for (const auto& [k, v] : over.items()) {
        const std::string p = path.empty() ? k : path + "." + k;
        if (!base.contains(k)) throw ConfigError("unknown configuration key", p);
        json& slot = base[k];
        if (slot.is_object()) {
            merge_into(slot, v, p);
        } else {
            if (!same_kind(slot, v)) throw ConfigError("expected " + std::string(slot.type_name()) + ", got " + v.type_name(), p);
            if (slot.is_number_integer() && v.is_number()) {
                if (slot.is_number_unsigned() && v.get<double>() < 0) throw ConfigError("must be non-negative", p);
                slot = v.is_number_unsigned() ? json(v.get<std::uint64_t>()) : json(v.get<std::int64_t>());
            } else {
                slot = v;
            }
        }
    }
}

}  // namespace detail

/// base <- overlay, recursively; overlay may only name keys present in base.
inline json merge_config(json base, const json& overlay) {
    detail::merge_into(base, overlay, "");
    return base;
}

/// Turns "a.b.c=value" into {"a":{"b":{"c":value}}}. The value is parsed as
/// JSON when possible, else taken as a string.
inline json parse_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value", assignment);
    const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json out = value;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t dot = key.find('.'); ; dot = key.find('.', start)) {
        parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (it->empty()) throw ConfigError("empty path segment", key);
        out = json{{*it, out}};
    }
    return out;
}

/// FNV-1a over the canonical (key-sorted, compact) JSON dump.
inline std::string config_hash(const json& cfg) { return hex64(stable_hash(cfg.dump())); }

/// Typed views of the merged document.
struct RunConfig {
    json doc;

    explicit RunConfig(json merged = default_config()) : doc(std::move(merged)) { validate(); }

    const json& at(const std::string& section) const { return doc.at(section); }
    std::string hash() const { return config_hash(doc); }
    Provenance provenance(std::uint64_t seed) const { return {hash(), seed}; }

    MatchMode match() const { return doc["decode"]["case_insensitive"].get<bool>() ? MatchMode::case_insensitive : MatchMode::exact; }
    Grammar grammar() const { return {doc["grammar"]["relation"].get<std::string>()}; }

    DatasetBuildOptions dataset() const {
        const auto& j = doc.at("dataset");
        DatasetBuildOptions o;
        o.min_freq = j["min_freq"].get<std::uint64_t>();
        o.k_collect = j["k_collect"].get<std::size_t>();
        o.target_size = j["list_size"].get<std::size_t>();
        o.max_tokens = j["max_tokens"].get<int>();
        o.ratios = {j["split"][0].get<double>(), j["split"][1].get<double>(), j["split"][2].get<double>()};
        o.seed = j["seed"].get<std::uint64_t>();
        return o;
    }

    lm::ModelConfig model() const {
        const auto& j = doc.at("model");
        lm::ModelConfig m;
        m.shape.dim = j["d"].get<std::size_t>();
        m.shape.hidden = j["H"].get<std::size_t>();
        m.shape.window = j["h"].get<std::size_t>();
        m.beam = j["beam"].get<std::size_t>();
        m.permutations = j["permutations"].get<std::size_t>();
        m.max_len = j["max_len"].get<std::size_t>();
        m.max_len_explained = j["max_len_explained"].get<std::size_t>();
        m.no_repeat_concept = j["no_repeat_concept"].get<bool>();
        m.seed = j["seed"].get<std::uint64_t>();
        auto phase = [](const json& p, std::uint64_t tag) {
            lm::PhaseConfig c;
            c.epochs = p["epochs"].get<std::size_t>();
            c.lr = p["lr"].get<double>();
            c.decay_after = p["decay_after"].get<std::size_t>();
            c.decay = p["decay"].get<double>();
            c.batch_size = p["batch_size"].get<std::size_t>();
            c.seed = tag;
            return c;
        };
        m.unordered = phase(j["unordered"], 1);
        m.ordered = phase(j["ordered"], 2);
        m.match = match();
        m.grammar = grammar();
        return m;
    }

    SgdOptions baseline_sgd(bool pair) const {
        const auto& j = doc.at("baselines");
        return {j["epochs"].get<std::size_t>(), j[pair ? "pair_lr" : "lr"].get<double>(), j["seed"].get<std::uint64_t>()};
    }

    TeacherEndpoint teacher() const {
        const auto& j = doc.at("teacher");
        TeacherEndpoint t;
        t.base_url = j["url"].get<std::string>();
        t.path = j["path"].get<std::string>();
        t.token_env = j["token_env"].get<std::string>();
        t.timeout_s = j["timeout_s"].get<double>();
        t.max_retries = j["max_retries"].get<int>();
        t.max_in_flight = j["max_in_flight"].get<std::size_t>();
        t.max_tokens = j["max_tokens"].get<int>();
        t.temperature = j["temperature"].get<double>();
        t.teacher_id = j["id"].get<std::string>();
        return t;
    }

    SyntheticWorldSpec synth() const {
        const auto& j = doc.at("synth");
        SyntheticWorldSpec s;
        s.n_concepts = j["n_concepts"].get<std::size_t>();
        s.n_categories = j["n_categories"].get<std::size_t>();
        s.baskets = j["baskets"].get<std::size_t>();
        s.complement_graph_density = j["complement_graph_density"].get<double>();
        s.noise_rate = j["noise_rate"].get<double>();
        s.seed = j["seed"].get<std::uint64_t>();
        s.k_collect = j["k_collect"].get<std::size_t>();
        s.vector_dim = j["vector_dim"].get<std::size_t>();
        s.products_per_concept = j["products_per_concept"].get<std::size_t>();
        s.max_also_buy = j["max_also_buy"].get<std::size_t>();
        s.complement_categories = j["complement_categories"].get<std::size_t>();
        return s;
    }

    std::vector<std::uint64_t> buckets() const { return doc["eval"]["buckets"].get<std::vector<std::uint64_t>>(); }
    std::size_t k() const { return doc["eval"]["k"].get<std::size_t>(); }

private:
    void validate() const {
        auto positive = [&](const char* section, const char* key) {
            const auto& v = doc.at(section).at(key);
            if (!(v.get<double>() > 0)) throw ConfigError("must be positive", std::string(section) + "." + key);
        };
        for (auto k : {"k_collect", "list_size", "max_tokens"}) positive("dataset", k);
        for (auto k : {"d", "H", "h", "beam", "permutations", "max_len", "max_len_explained"}) positive("model", k);
        for (auto ph : {"unordered", "ordered"}) {
            const auto& p = doc["model"][ph];
            for (auto k : {"lr", "batch_size", "decay"})
                if (!(p[k].get<double>() > 0)) throw ConfigError("must be positive", std::string("model.") + ph + "." + k);
        }
        const auto& split = doc["dataset"]["split"];
        if (!split.is_array() || split.size() != 3)
            throw ConfigError("split needs three ratios [train, dev, test]", "dataset.split");
        for (const auto& r : split)
            if (!r.is_number()) throw ConfigError("split ratios must be numbers", "dataset.split");
        if (doc["dataset"]["list_size"].get<std::size_t>() > doc["dataset"]["k_collect"].get<std::size_t>())
            throw ConfigError("list_size must not exceed k_collect", "dataset.list_size");
        const auto relation = doc["grammar"]["relation"].get<std::string>();
        if (normalize_surface(relation).empty() || grammar_violation(relation) || contains_serial_marker(relation))
            throw ConfigError("relation phrase is empty or collides with the list grammar", "grammar.relation");
        positive("eval", "k");
        for (auto k : {"lr", "pair_lr", "knn_k", "list_size"}) positive("baselines", k);
    }
};

/// defaults < file (if any) < each override in order.
inline RunConfig load_run_config(const std::string& file, const std::vector<std::string>& overrides) {
    json doc = default_config();
    if (!file.empty()) {
        json j;
        try {
            j = read_json_file(file);
        } catch (const DataError& e) {
            throw ConfigError(e.what(), "--config");
        }
        doc = merge_config(std::move(doc), j);
    }
    for (const auto& o : overrides) doc = merge_config(std::move(doc), parse_override(o));
    return RunConfig(std::move(doc));
}

}  // namespace ccgen

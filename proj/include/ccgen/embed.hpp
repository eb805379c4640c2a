#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/error.hpp"

namespace ccgen {

using Vec = std::vector<double>;

class WordVectorTable {
public:
    explicit WordVectorTable(std::size_t dim = 0, bool lowercase = true) : dim_(dim), lowercase_(lowercase) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return vectors_.size(); }
    bool lowercase() const noexcept { return lowercase_; }

    /// First insertion of a (normalized) token wins.
    void add(std::string_view token, Vec v) {
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_ || dim_ == 0) throw DataError("vector for '" + std::string(token) + "' has wrong dimension");
        vectors_.emplace(key(token), std::move(v));
    }

    const Vec* find(std::string_view token) const {
        auto it = vectors_.find(key(token));
        return it == vectors_.end() ? nullptr : &it->second;
    }

private:
    std::string key(std::string_view t) const { return lowercase_ ? to_lower(t) : std::string(t); }

    std::size_t dim_;
    bool lowercase_;
    std::unordered_map<std::string, Vec> vectors_;
};

/// Text format: "token v1 ... vd" per line; d is taken from the first line.
inline WordVectorTable read_word_vectors(std::istream& in, const std::string& name = "<stream>", bool lowercase = true) {
    WordVectorTable table(0, lowercase);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string token;
        if (!(ss >> token)) continue;
        Vec v;
        std::string field;
        while (ss >> field) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw DataError(name + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
            }
        }
        if (v.empty()) throw DataError(name + ":" + std::to_string(lineno) + ": token without vector");
        if (table.dim() != 0 && v.size() != table.dim())
            throw DataError(name + ":" + std::to_string(lineno) + ": dimension " + std::to_string(v.size()) +
                            " differs from " + std::to_string(table.dim()));
        table.add(token, std::move(v));
    }
    if (table.size() == 0) throw DataError(name + ": no word vectors");
    return table;
}

inline WordVectorTable load_word_vectors(const std::string& path, bool lowercase = true) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word vector file '" + path + "'");
    return read_word_vectors(in, path, lowercase);
}

struct ConceptEmbedding {
    ConceptId concept_id = 0;
    Vec vector;
    double coverage = 0.0;  // fraction of tokens found in the table
};

/// Sum of the token vectors; unknown tokens add nothing.
inline ConceptEmbedding compose_text(std::string_view surface, const WordVectorTable& table) {
    ConceptEmbedding e;
    e.vector.assign(table.dim(), 0.0);
    auto toks = split_whitespace(surface);
    std::size_t hit = 0;
    for (const auto& t : toks) {
        if (const Vec* v = table.find(t)) {
            ++hit;
            for (std::size_t i = 0; i < v->size(); ++i) e.vector[i] += (*v)[i];
        }
    }
    e.coverage = toks.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(toks.size());
    return e;
}

inline ConceptEmbedding compose(const Concept& c, const WordVectorTable& table) {
    auto e = compose_text(c.surface, table);
    e.concept_id = c.id;
    return e;
}

inline std::vector<ConceptEmbedding> compose_all(const ConceptSet& set, const WordVectorTable& table) {
    std::vector<ConceptEmbedding> out;
    out.reserve(set.size());
    for (const auto& c : set) out.push_back(compose(c, table));
    return out;
}

inline double dot(const Vec& u, const Vec& v) {
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline double norm(const Vec& u) { return std::sqrt(dot(u, u)); }

/// Cosine similarity; 0 when either operand is the zero vector.
inline double cosine(const Vec& u, const Vec& v) {
    if (u.size() != v.size())
        throw DataError("cosine of vectors with lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

struct ScoredId {
    ConceptId concept_id;
    double score;
};

/// Orders candidates by score descending, ties by ascending concept id, and
/// keeps the first top_n.
inline std::vector<ScoredId> top_by_score(std::vector<ScoredId> v, std::size_t top_n) {
    std::sort(v.begin(), v.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.concept_id < b.concept_id;
    });
    if (v.size() > top_n) v.resize(top_n);
    return v;
}

/// Concepts closest to `query` by cosine. `exclude` (typically the query
/// concept itself) is never returned.
inline std::vector<ConceptId> nearest_concepts(const Vec& query, const std::vector<ConceptEmbedding>& embeddings,
                                               std::size_t top_n, std::optional<ConceptId> exclude = std::nullopt) {
    std::vector<ScoredId> scored;
    scored.reserve(embeddings.size());
    for (const auto& e : embeddings)
        if (!exclude || e.concept_id != *exclude) scored.push_back({e.concept_id, cosine(query, e.vector)});
    std::vector<ConceptId> out;
    for (const auto& s : top_by_score(std::move(scored), top_n)) out.push_back(s.concept_id);
    return out;
}

}  // namespace ccgen

#pragma once

// Domain types shared across the harness: concepts, concept sets, ranked
// complement lists and decoded prediction records.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccgen/error.hpp"

namespace ccgen {

using ConceptId = std::uint32_t;

// ---------------------------------------------------------------------------
// text helpers

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Trim and collapse internal whitespace runs to a single space.
inline std::string normalize_surface(std::string_view s) {
    std::string out;
    for (const auto& tok : split_whitespace(s)) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

inline int count_tokens(std::string_view s) {
    return static_cast<int>(split_whitespace(s).size());
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// concepts

struct Concept {
    ConceptId id = 0;
    std::string surface;
    int token_count = 0;

    friend bool operator==(const Concept&, const Concept&) = default;
};

enum class MatchMode { exact, case_insensitive };

/// Interned, insertion-ordered concept universe. Mutable until freeze(); after
/// that it only serves lookups and may be shared between threads.
class ConceptSet {
public:
    const Concept& intern(std::string_view surface) {
        auto norm = normalize_surface(surface);
        if (norm.empty()) throw DataError("concept surface is empty");
        if (auto it = index_.find(norm); it != index_.end()) return concepts_[it->second];
        if (frozen_) throw DataError("cannot intern '" + norm + "' into a frozen concept set");
        Concept c{static_cast<ConceptId>(concepts_.size()), norm, count_tokens(norm)};
        index_.emplace(norm, c.id);
        lower_index_.emplace(to_lower(norm), c.id);  // first insertion wins
        concepts_.push_back(std::move(c));
        return concepts_.back();
    }

    const Concept* lookup(std::string_view surface, MatchMode mode = MatchMode::exact) const {
        auto norm = normalize_surface(surface);
        if (mode == MatchMode::exact) {
            auto it = index_.find(norm);
            return it == index_.end() ? nullptr : &concepts_[it->second];
        }
        auto it = lower_index_.find(to_lower(norm));
        return it == lower_index_.end() ? nullptr : &concepts_[it->second];
    }

    const Concept& at(ConceptId id) const {
        if (id >= concepts_.size()) throw DataError("concept id " + std::to_string(id) + " out of range");
        return concepts_[id];
    }
    const Concept& operator[](ConceptId id) const { return concepts_[id]; }

    void freeze() noexcept { frozen_ = true; }
    bool frozen() const noexcept { return frozen_; }

    std::size_t size() const noexcept { return concepts_.size(); }
    bool empty() const noexcept { return concepts_.empty(); }
    auto begin() const noexcept { return concepts_.begin(); }
    auto end() const noexcept { return concepts_.end(); }

private:
    std::vector<Concept> concepts_;
    std::unordered_map<std::string, ConceptId> index_;
    std::unordered_map<std::string, ConceptId> lower_index_;
    bool frozen_ = false;
};

/// Reads the concept-set file: one surface per line, '#' comments and blank
/// lines skipped. Ids follow line order.
inline ConceptSet read_concept_set(std::istream& in) {
    ConceptSet set;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        set.intern(t);
    }
    set.freeze();
    return set;
}

inline ConceptSet load_concept_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open concept set file '" + path + "'");
    return read_concept_set(in);
}

inline void write_concept_set(std::ostream& out, const ConceptSet& set) {
    for (const auto& c : set) out << c.surface << '\n';
}

// ---------------------------------------------------------------------------
// ranked lists and predictions

struct ScoredConcept {
    ConceptId concept_id = 0;
    double confidence = 0.0;

    friend bool operator==(const ScoredConcept&, const ScoredConcept&) = default;
};

struct RankedList {
    ConceptId input = 0;
    std::vector<ScoredConcept> targets;

    std::vector<ConceptId> top(std::size_t n) const {
        std::vector<ConceptId> out;
        for (std::size_t i = 0; i < targets.size() && i < n; ++i) out.push_back(targets[i].concept_id);
        return out;
    }

    friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// One generated list position. `concept` is set only when `text` names a
/// member of the concept set.
struct Slot {
    int position = 0;
    std::string text;
    std::optional<ConceptId> concept_id;
    std::optional<std::string> explanation;

    bool valid() const noexcept { return concept_id.has_value(); }
    friend bool operator==(const Slot&, const Slot&) = default;
};

/// Decoded generator output. Slots are kept verbatim, duplicates included.
struct PredictionRecord {
    std::string input;
    std::optional<ConceptId> input_id;
    std::vector<Slot> slots;
    std::string raw_text;
    std::string source;
    int prefix_len = 0;     // leading slots that were given, not generated
    bool truncated = false; // malformed tail or decode length cap hit

    const Slot* slot_at(int position) const {
        for (const auto& s : slots)
            if (s.position == position) return &s;
        return nullptr;
    }

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

}  // namespace ccgen

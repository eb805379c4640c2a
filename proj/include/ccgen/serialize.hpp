#pragma once

// The list grammar:
//
//   [SOS] {x} are purchased with 1) {y1} 2) {y2} ... k) {yk} [EOS]
//   [SOS] {x} are purchased with 1) {y1}: {e1} ... k) {yk}: {ek} [EOS]
//
// plus prefix prompts for sequential generation and the inverse decoder.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

inline constexpr std::string_view kSos = "[SOS]";
inline constexpr std::string_view kEos = "[EOS]";

struct Grammar {
    std::string relation = "are purchased with";
};

enum class ExampleKind { ordered, permuted, explained, prefix_prompt, single_target };

struct SerializedExample {
    std::string text;
    ExampleKind kind = ExampleKind::ordered;
    std::string input;
};

struct PermutationBatch {
    std::vector<std::string> source;
    std::vector<std::vector<std::size_t>> orders;  // indices into source
    std::vector<SerializedExample> permutations;
    std::size_t count() const noexcept { return permutations.size(); }
};

namespace detail {

inline std::string head(std::string_view x, const Grammar& g) {
    std::string s(kSos);
    s += ' ';
    s += normalize_surface(x);
    s += ' ';
    s += g.relation;
    return s;
}

inline void require_surface(std::string_view s, const char* what) {
    if (normalize_surface(s).empty()) throw DataError(std::string("empty ") + what + " surface");
}

/// Finds a serial marker "m)" starting at or after `from`: a digit run
/// preceded by whitespace (or string start) and followed by ')' and then
/// whitespace or end of text. Returns npos if none.
inline std::size_t find_marker(std::string_view s, std::size_t from, int* number, std::size_t* length) {
    for (std::size_t i = from; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
        if (i > 0 && !is_space(s[i - 1])) continue;
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        if (j >= s.size() || s[j] != ')') {
            i = j;
            continue;
        }
        if (j + 1 < s.size() && !is_space(s[j + 1])) {
            i = j;
            continue;
        }
        if (j - i > 6) {  // absurdly long digit run; not a marker
            i = j;
            continue;
        }
        *number = std::stoi(std::string(s.substr(i, j - i)));
        *length = j + 1 - i;
        return i;
    }
    return std::string_view::npos;
}

}  // namespace detail

/// True if `s` contains a serial marker such as "2)" at a token boundary.
inline bool contains_serial_marker(std::string_view s) {
    int n = 0;
    std::size_t len = 0;
    return detail::find_marker(s, 0, &n, &len) != std::string_view::npos;
}

/// Surfaces the grammar cannot carry unambiguously.
inline std::optional<std::string> grammar_violation(std::string_view surface) {
    if (contains_serial_marker(surface)) return "contains a serial marker";
    if (surface.find(": ") != std::string_view::npos || (!surface.empty() && surface.back() == ':'))
        return "contains the explanation delimiter ': '";
    if (surface.find(kSos) != std::string_view::npos || surface.find(kEos) != std::string_view::npos)
        return "contains a sequence boundary token";
    return std::nullopt;
}

inline SerializedExample encode_ordered(std::string_view x, const std::vector<std::string>& targets,
                                        const Grammar& g = {}) {
    detail::require_surface(x, "input");
    if (targets.empty()) throw DataError("cannot encode an empty target list");
    std::string s = detail::head(x, g);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        detail::require_surface(targets[i], "target");
        s += ' ' + std::to_string(i + 1) + ") " + normalize_surface(targets[i]);
    }
    s += ' ';
    s += kEos;
    return {std::move(s), ExampleKind::ordered, normalize_surface(x)};
}

inline SerializedExample encode_with_explanations(std::string_view x, const std::vector<std::string>& targets,
                                                  const std::vector<std::string>& explanations,
                                                  const Grammar& g = {}) {
    detail::require_surface(x, "input");
    if (targets.empty()) throw DataError("cannot encode an empty target list");
    if (targets.size() != explanations.size())
        throw DataError("explanation count " + std::to_string(explanations.size()) + " does not match target count " +
                        std::to_string(targets.size()));
    std::string s = detail::head(x, g);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        detail::require_surface(targets[i], "target");
        auto e = normalize_surface(explanations[i]);
        if (e.empty()) throw DataError("empty explanation for '" + targets[i] + "'");
        if (contains_serial_marker(e)) throw DataError("explanation for '" + targets[i] + "' contains a serial marker");
        s += ' ' + std::to_string(i + 1) + ") " + normalize_surface(targets[i]) + ": " + e;
    }
    s += ' ';
    s += kEos;
    return {std::move(s), ExampleKind::explained, normalize_surface(x)};
}

/// Single-target line used by the no-list-generation ablation:
/// "[SOS] x are purchased with y [EOS]".
inline SerializedExample encode_single_target(std::string_view x, std::string_view y, const Grammar& g = {}) {
    detail::require_surface(x, "input");
    detail::require_surface(y, "target");
    std::string s = detail::head(x, g) + ' ' + normalize_surface(y) + ' ' + std::string(kEos);
    return {std::move(s), ExampleKind::single_target, normalize_surface(x)};
}

/// "[SOS] x are purchased with 1) g1 ... n) gn n+1)"; with nothing given the
/// prompt stops after the relation phrase.
inline SerializedExample build_prefix_prompt(std::string_view x, const std::vector<std::string>& given,
                                             const Grammar& g = {}) {
    detail::require_surface(x, "input");
    std::string s = detail::head(x, g);
    if (!given.empty()) {
        for (std::size_t i = 0; i < given.size(); ++i)
            s += ' ' + std::to_string(i + 1) + ") " + normalize_surface(given[i]);
        s += ' ' + std::to_string(given.size() + 1) + ')';
    }
    return {std::move(s), ExampleKind::prefix_prompt, normalize_surface(x)};
}

struct DecodeOptions {
    Grammar grammar;
    bool expect_explanations = false;
    MatchMode match = MatchMode::exact;
    /// Treat the whole continuation as one unnumbered slot (ablation output).
    bool single_target = false;
};

/// Parses generated text back into slots. Never throws: a missing first
/// marker or an out-of-order marker ends parsing and sets `truncated`.
inline PredictionRecord decode_list(std::string_view text, const ConceptSet& set, const DecodeOptions& opt = {}) {
    PredictionRecord rec;
    rec.raw_text = std::string(text);

    std::string_view body = trim(text);
    if (body.substr(0, kSos.size()) == kSos) body = trim(body.substr(kSos.size()));

    const std::string rel = " " + opt.grammar.relation;
    std::size_t rp = (" " + std::string(body)).find(rel);
    if (rp == std::string::npos) {
        rec.truncated = !body.empty();
        return rec;
    }
    // rp indexes the space-prefixed copy; in `body` the relation starts at rp.
    rec.input = normalize_surface(body.substr(0, rp));
    if (const Concept* c = set.lookup(rec.input, opt.match)) rec.input_id = c->id;
    body = body.substr(std::min(body.size(), rp + opt.grammar.relation.size()));
    if (auto eos = body.find(kEos); eos != std::string_view::npos) body = body.substr(0, eos);

    auto make_slot = [&](int position, std::string_view content) {
        Slot s;
        s.position = position;
        content = trim(content);
        if (opt.expect_explanations) {
            auto d = content.find(": ");
            if (d != std::string_view::npos) {
                s.explanation = normalize_surface(content.substr(d + 2));
                content = content.substr(0, d);
            } else if (!content.empty() && content.back() == ':') {
                content.remove_suffix(1);
            }
        }
        s.text = normalize_surface(content);
        if (const Concept* c = s.text.empty() ? nullptr : set.lookup(s.text, opt.match)) s.concept_id = c->id;
        rec.slots.push_back(std::move(s));
    };

    if (opt.single_target) {
        if (!trim(body).empty()) make_slot(1, body);
        return rec;
    }

    std::string_view rest = trim(body);
    int number = 0;
    std::size_t len = 0;
    std::size_t at = detail::find_marker(rest, 0, &number, &len);
    if (at != 0 || number != 1) {
        rec.truncated = !rest.empty();
        return rec;
    }
    int expected = 1;
    std::size_t start = len;
    for (;;) {
        at = detail::find_marker(rest, start, &number, &len);
        if (at == std::string_view::npos) {
            make_slot(expected, rest.substr(start));
            break;
        }
        make_slot(expected, rest.substr(start, at - start));
        if (number != expected + 1) {
            rec.truncated = true;
            break;
        }
        ++expected;
        start = at + len;
    }
    return rec;
}

/// Draws n distinct orderings of `targets`, uniformly without replacement
/// over the permutation space (the identity is eligible).
inline PermutationBatch sample_permutations(std::string_view x, const std::vector<std::string>& targets,
                                            std::size_t n, std::uint64_t seed, const Grammar& g = {}) {
    const std::size_t k = targets.size();
    if (k < 2) throw DataError("permutation sampling needs at least 2 targets");
    // k! saturating
    double space = 1.0;
    for (std::size_t i = 2; i <= k; ++i) space *= static_cast<double>(i);
    if (static_cast<double>(n) > space)
        throw DataError("requested " + std::to_string(n) + " permutations but only " +
                        std::to_string(static_cast<long long>(space)) + " exist");

    Rng rng = make_rng(seed, {stable_hash(normalize_surface(x))});
    std::vector<std::size_t> base(k);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<std::size_t>> orders;

    if (space <= 40320.0) {
        // enumerate, then take a random n-subset via partial Fisher-Yates
        std::vector<std::vector<std::size_t>> all;
        auto p = base;
        do all.push_back(p);
        while (std::next_permutation(p.begin(), p.end()));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = i + uniform_index(rng, all.size() - i);
            std::swap(all[i], all[j]);
            orders.push_back(all[i]);
        }
    } else {
        std::set<std::vector<std::size_t>> seen;
        while (orders.size() < n) {
            auto p = base;
            std::shuffle(p.begin(), p.end(), rng);
            if (seen.insert(p).second) orders.push_back(std::move(p));
        }
    }

    PermutationBatch batch;
    batch.source = targets;
    for (const auto& order : orders) {
        std::vector<std::string> permuted;
        for (auto i : order) permuted.push_back(targets[i]);
        auto ex = encode_ordered(x, permuted, g);
        ex.kind = ExampleKind::permuted;
        batch.permutations.push_back(std::move(ex));
    }
    batch.orders = std::move(orders);
    return batch;
}

}  // namespace ccgen

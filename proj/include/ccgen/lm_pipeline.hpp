#pragma once

// Corpora, generation and the training recipes built on the list model:
// two-step (permuted lists, then ordered lists), ordered-only, and the
// single-target ablation.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccgen/dataset.hpp"
#include "ccgen/listlm.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/serialize.hpp"

namespace ccgen::lm {

struct ModelConfig {
    LmShape shape;
    PhaseConfig unordered{8, 0.05, 4, 0.8, 8, 1, true};
    PhaseConfig ordered{30, 0.05, 15, 0.9, 8, 2, true};
    std::size_t permutations = 10;
    std::size_t beam = 5;
    std::size_t max_len = 48;
    std::size_t max_len_explained = 200;
    bool no_repeat_concept = false;
    std::uint64_t seed = 1;
    MatchMode match = MatchMode::exact;
    Grammar grammar;
};

inline std::vector<std::string> ordered_corpus(const Dataset& d, const std::vector<ConceptId>& ids,
                                               const Grammar& g = {}) {
    std::vector<std::string> out;
    for (auto x : ids) out.push_back(encode_ordered(d.concepts.at(x).surface, d.target_surfaces(x), g).text);
    return out;
}

/// n permutations of each list, keyed by (seed, input surface).
inline std::vector<std::string> permutation_corpus(const Dataset& d, const std::vector<ConceptId>& ids, std::size_t n,
                                                   std::uint64_t seed, const Grammar& g = {}) {
    std::vector<std::string> out;
    for (auto x : ids) {
        auto batch = sample_permutations(d.concepts.at(x).surface, d.target_surfaces(x), n, seed, g);
        for (auto& ex : batch.permutations) out.push_back(std::move(ex.text));
    }
    return out;
}

/// One "[SOS] x are purchased with y [EOS]" line per target.
inline std::vector<std::string> single_target_corpus(const Dataset& d, const std::vector<ConceptId>& ids,
                                                     const Grammar& g = {}) {
    std::vector<std::string> out;
    for (auto x : ids)
        for (const auto& y : d.target_surfaces(x)) out.push_back(encode_single_target(d.concepts.at(x).surface, y, g).text);
    return out;
}

inline std::vector<TokenizedSequence> tokenize_corpus(const ListLm& m, const std::vector<std::string>& lines) {
    std::vector<TokenizedSequence> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(m.tokenize(l, false));
    return out;
}

struct GenerateOptions {
    BeamOptions beam;
    bool expect_explanations = false;
    bool single_target = false;
    MatchMode match = MatchMode::exact;
    std::string source = "listlm";
};

/// Prefix prompt, beam search, then the list grammar's decoder. Never throws
/// on model output: malformed or over-long generations come back flagged.
inline PredictionRecord generate_list(const ListLm& m, const ConceptSet& set, std::string_view x,
                                      const std::vector<std::string>& prefix, const GenerateOptions& opt) {
    const auto prompt = build_prefix_prompt(x, prefix, m.grammar());
    const auto seq = m.tokenize(prompt.text, true);
    const auto res = beam_decode(m, seq, opt.beam);
    std::string text = prompt.text;
    if (!res.tokens.empty()) text += " " + m.vocab().decode(res.tokens);
    DecodeOptions dopt{m.grammar(), opt.expect_explanations, opt.match, opt.single_target};
    auto rec = decode_list(text, set, dopt);
    rec.input = normalize_surface(x);
    const Concept* c = set.lookup(rec.input, opt.match);
    rec.input_id = c ? std::optional<ConceptId>(c->id) : std::nullopt;
    rec.source = opt.source;
    rec.prefix_len = static_cast<int>(prefix.size());
    if (!res.finished) rec.truncated = true;
    return rec;
}

inline GenerateOptions generate_options(const ModelConfig& cfg, bool explained, bool single_target) {
    GenerateOptions g;
    g.beam = {cfg.beam, explained ? cfg.max_len_explained : cfg.max_len, cfg.no_repeat_concept};
    g.expect_explanations = explained;
    g.single_target = single_target;
    g.match = cfg.match;
    return g;
}

inline std::vector<PredictionRecord> generate_split(const ListLm& m, const Dataset& d, const std::vector<ConceptId>& ids,
                                                    const GenerateOptions& opt) {
    std::vector<PredictionRecord> out;
    for (auto x : ids) out.push_back(generate_list(m, d.concepts, d.concepts.at(x).surface, {}, opt));
    return out;
}

/// Dev nDCG_5 of plain generation; the checkpoint-selection score.
inline Validator dev_validator(const Dataset& d, GenerateOptions opt) {
    if (d.splits.dev.empty()) return {};
    auto truth = std::make_shared<GroundTruth>(d);
    return [&d, opt, truth](const ListLm& m) {
        return ndcg(generate_split(m, d, d.splits.dev, opt), *truth, static_cast<int>(d.target_size));
    };
}

struct TrainedModels {
    std::optional<ListLm> unordered;  // phase-1 checkpoint of a two-step run
    ListLm model;
    std::vector<PhaseLog> logs;
};

namespace detail {

inline ListLm fresh_model(const std::vector<std::string>& corpus, const ModelConfig& cfg) {
    auto vocab = Vocab::build(corpus);
    LmShape s = cfg.shape;
    s.vocab = vocab.size();
    ListLm m(std::move(vocab), LmParams::random(s, cfg.seed), cfg.grammar);
    m.seed = cfg.seed;
    return m;
}

inline PhaseConfig seeded(PhaseConfig p, std::uint64_t seed) {
    p.seed = derive_seed(seed, {p.seed});
    return p;
}

}  // namespace detail

/// Ordered training only, on `phase2` lines (plain ordered lists by default,
/// or an explanation-augmented corpus).
inline TrainedModels train_ordered_only(const Dataset& d, const ModelConfig& cfg,
                                        const std::vector<std::string>* phase2 = nullptr) {
    const auto lines = phase2 ? *phase2 : ordered_corpus(d, d.splits.train, cfg.grammar);
    TrainedModels out{std::nullopt, detail::fresh_model(lines, cfg), {}};
    if (phase2) out.model.format = "explained";
    auto val = dev_validator(d, generate_options(cfg, phase2 != nullptr, false));
    out.logs.push_back(train_phase(out.model, tokenize_corpus(out.model, lines), detail::seeded(cfg.ordered, cfg.seed),
                                   val, "ordered"));
    return out;
}

/// Phase 1 on n permutations per training list, phase 2 on the ordered (or
/// explained) corpus, starting from the phase-1 weights. The vocabulary covers
/// both corpora.
inline TrainedModels train_two_step(const Dataset& d, const ModelConfig& cfg,
                                    const std::vector<std::string>* phase2 = nullptr) {
    const auto perm = permutation_corpus(d, d.splits.train, cfg.permutations, cfg.seed, cfg.grammar);
    const auto lines = phase2 ? *phase2 : ordered_corpus(d, d.splits.train, cfg.grammar);
    auto all = perm;
    all.insert(all.end(), lines.begin(), lines.end());
    TrainedModels out{std::nullopt, detail::fresh_model(all, cfg), {}};
    out.logs.push_back(train_phase(out.model, tokenize_corpus(out.model, perm), detail::seeded(cfg.unordered, cfg.seed),
                                   dev_validator(d, generate_options(cfg, false, false)), "unordered"));
    out.unordered = out.model;
    if (phase2) out.model.format = "explained";
    out.logs.push_back(train_phase(out.model, tokenize_corpus(out.model, lines), detail::seeded(cfg.ordered, cfg.seed),
                                   dev_validator(d, generate_options(cfg, phase2 != nullptr, false)), "ordered"));
    return out;
}

/// Single-target lines, one per (x, y_i): the no-list-generation variant.
inline TrainedModels ablation_single_target(const Dataset& d, const ModelConfig& cfg) {
    const auto lines = single_target_corpus(d, d.splits.train, cfg.grammar);
    TrainedModels out{std::nullopt, detail::fresh_model(lines, cfg), {}};
    out.model.format = "single_target";
    out.logs.push_back(train_phase(out.model, tokenize_corpus(out.model, lines), detail::seeded(cfg.ordered, cfg.seed),
                                   dev_validator(d, generate_options(cfg, false, true)), "single_target"));
    return out;
}

inline json phase_log_json(const PhaseLog& l) {
    json epochs = json::array();
    for (const auto& e : l.epochs) {
        json j = {{"epoch", e.epoch}, {"train_logprob", e.train_logprob}};
        if (e.dev_score) j["dev_ndcg"] = *e.dev_score;
        epochs.push_back(j);
    }
    json j = {{"tag", l.tag}, {"best_epoch", l.best_epoch}, {"epochs", epochs}};
    if (l.best_score) j["best_dev_ndcg"] = *l.best_score;
    return j;
}

}  // namespace ccgen::lm

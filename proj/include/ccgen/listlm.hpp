#pragma once

// A compact autoregressive next-token model over whitespace tokens:
//
//   z_t   = [E(s_{t-h}) ... E(s_{t-1}) ; c]     c = mean E over the input concept's tokens
//   h_t   = tanh(W1^T z_t + b1)
//   p_t   = softmax(W2^T h_t + b2)
//
// log P(s | x) = sum_t log p_t[s_t]. The explicit conditioning vector c keeps
// the input concept visible no matter how far generation has moved past it.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/io.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/serialize.hpp"

namespace ccgen::lm {

using TokenId = std::uint32_t;

inline constexpr TokenId kSosId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr std::string_view kUnk = "[UNK]";

inline bool is_marker_token(std::string_view t) {
    if (t.size() < 2 || t.back() != ')') return false;
    return std::all_of(t.begin(), t.end() - 1, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

class Vocab {
public:
    Vocab() { reset({}); }

    /// Specials first, then corpus tokens by frequency (desc) and spelling.
    static Vocab build(const std::vector<std::string>& corpus) {
        std::map<std::string, std::size_t> counts;
        for (const auto& line : corpus)
            for (auto& t : split_whitespace(line))
                if (t != kSos && t != kEos && t != kUnk) ++counts[t];
        if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
        std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        std::vector<std::string> tokens;
        for (auto& [t, n] : v) tokens.push_back(t);
        Vocab vocab;
        vocab.reset(tokens);
        return vocab;
    }

    static Vocab from_tokens(const std::vector<std::string>& all) {
        if (all.size() < 3 || all[0] != kSos || all[1] != kEos || all[2] != kUnk)
            throw DataError("vocabulary must start with [SOS], [EOS], [UNK]");
        Vocab v;
        v.reset({all.begin() + 3, all.end()});
        return v;
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    bool is_marker(TokenId id) const { return marker_.at(id); }

    std::optional<TokenId> find(std::string_view t) const {
        auto it = index_.find(std::string(t));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<TokenId> encode(std::string_view text, bool allow_unk = true) const {
        std::vector<TokenId> ids;
        for (const auto& t : split_whitespace(text)) {
            if (auto id = find(t)) ids.push_back(*id);
            else if (allow_unk) ids.push_back(kUnkId);
            else throw DataError("token '" + t + "' is not in the vocabulary");
        }
        return ids;
    }

    std::string decode(std::span<const TokenId> ids) const {
        std::string s;
        for (auto id : ids) {
            if (!s.empty()) s += ' ';
            s += token(id);
        }
        return s;
    }

private:
    void reset(const std::vector<std::string>& body) {
        tokens_ = {std::string(kSos), std::string(kEos), std::string(kUnk)};
        tokens_.insert(tokens_.end(), body.begin(), body.end());
        index_.clear();
        marker_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            index_.emplace(tokens_[i], static_cast<TokenId>(i));
            marker_.push_back(is_marker_token(tokens_[i]));
        }
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::vector<bool> marker_;
};

struct LmShape {
    std::size_t vocab = 0;
    std::size_t dim = 32;     // token embedding width d
    std::size_t hidden = 128; // H
    std::size_t window = 9;   // history tokens h

    std::size_t input_width() const noexcept { return (window + 1) * dim; }
    friend bool operator==(const LmShape&, const LmShape&) = default;
};

/// Parameters, also used as the gradient container.
struct LmParams {
    LmShape shape;
    std::vector<double> embed;     // V x d
    std::vector<double> w_hidden;  // (h+1)d x H
    std::vector<double> b_hidden;  // H
    std::vector<double> w_out;     // H x V
    std::vector<double> b_out;     // V

    static LmParams zeros(LmShape s) {
        LmParams p;
        p.shape = s;
        p.embed.assign(s.vocab * s.dim, 0.0);
        p.w_hidden.assign(s.input_width() * s.hidden, 0.0);
        p.b_hidden.assign(s.hidden, 0.0);
        p.w_out.assign(s.hidden * s.vocab, 0.0);
        p.b_out.assign(s.vocab, 0.0);
        return p;
    }

    static LmParams random(LmShape s, std::uint64_t seed) {
        auto p = zeros(s);
        Rng rng = make_rng(seed, {0x11a1});
        std::normal_distribution<double> g(0.0, 0.1);
        for (auto& e : p.embed) e = g(rng);
        const double a1 = std::sqrt(6.0 / static_cast<double>(s.input_width() + s.hidden));
        for (auto& e : p.w_hidden) e = uniform_real(rng, -a1, a1);
        const double a2 = std::sqrt(6.0 / static_cast<double>(s.hidden + s.vocab));
        for (auto& e : p.w_out) e = uniform_real(rng, -a2, a2);
        return p;
    }

    std::array<std::vector<double>*, 5> blocks() { return {&embed, &w_hidden, &b_hidden, &w_out, &b_out}; }
    std::array<const std::vector<double>*, 5> blocks() const { return {&embed, &w_hidden, &b_hidden, &w_out, &b_out}; }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto* b : blocks()) n += b->size();
        return n;
    }

    double& flat(std::size_t i) {
        for (auto* b : blocks()) {
            if (i < b->size()) return (*b)[i];
            i -= b->size();
        }
        throw std::out_of_range("parameter index");
    }
    double flat(std::size_t i) const { return const_cast<LmParams*>(this)->flat(i); }

    /// this += a * g
    void axpy(double a, const LmParams& g) {
        auto dst = blocks();
        auto src = g.blocks();
        for (std::size_t b = 0; b < dst.size(); ++b)
            for (std::size_t i = 0; i < dst[b]->size(); ++i) (*dst[b])[i] += a * (*src[b])[i];
    }

    void set_zero() {
        for (auto* b : blocks()) std::fill(b->begin(), b->end(), 0.0);
    }

    bool finite() const {
        for (const auto* b : blocks())
            for (double v : *b)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Token ids of one serialized line plus the span holding the input concept.
struct TokenizedSequence {
    std::vector<TokenId> ids;
    std::size_t cond_begin = 0;
    std::size_t cond_end = 0;
};

class ListLm {
public:
    ListLm() = default;
    ListLm(Vocab vocab, LmParams params, Grammar grammar = {})
        : vocab_(std::move(vocab)), params_(std::move(params)), grammar_(std::move(grammar)) {
        if (params_.shape.vocab != vocab_.size()) throw DataError("parameter shape does not match vocabulary size");
        relation_ids_ = vocab_.encode(grammar_.relation);
    }

    const Vocab& vocab() const noexcept { return vocab_; }
    const LmParams& params() const noexcept { return params_; }
    LmParams& params() noexcept { return params_; }
    const LmShape& shape() const noexcept { return params_.shape; }
    const Grammar& grammar() const noexcept { return grammar_; }

    std::uint64_t seed = 0;
    std::vector<std::string> phases;  // training history tags
    std::string format = "plain";     // plain | explained | single_target

    /// Conditioning span: tokens after [SOS] up to the relation phrase.
    void locate_condition(TokenizedSequence& seq) const {
        seq.cond_begin = seq.cond_end = 0;
        if (seq.ids.empty() || seq.ids[0] != kSosId) return;
        const auto& rel = relation_ids_;
        for (std::size_t p = 1; p + rel.size() <= seq.ids.size(); ++p) {
            if (std::equal(rel.begin(), rel.end(), seq.ids.begin() + static_cast<std::ptrdiff_t>(p))) {
                seq.cond_begin = 1;
                seq.cond_end = p;
                return;
            }
        }
    }

    TokenizedSequence tokenize(std::string_view text, bool allow_unk = true) const {
        TokenizedSequence seq{vocab_.encode(text, allow_unk), 0, 0};
        if (seq.ids.empty() || seq.ids[0] != kSosId) throw DataError("sequence must begin with [SOS]");
        locate_condition(seq);
        return seq;
    }

private:
    Vocab vocab_;
    LmParams params_;
    Grammar grammar_;
    std::vector<TokenId> relation_ids_;
};

// ---------------------------------------------------------------------------
// numerics

namespace detail {

struct Workspace {
    std::vector<double> cond, z, hid, logits, probs, dlogits, dhid, dz;

    void resize(const LmShape& s) {
        cond.assign(s.dim, 0.0);
        z.assign(s.input_width(), 0.0);
        hid.assign(s.hidden, 0.0);
        logits.assign(s.vocab, 0.0);
        probs.assign(s.vocab, 0.0);
        dlogits.assign(s.vocab, 0.0);
        dhid.assign(s.hidden, 0.0);
        dz.assign(s.input_width(), 0.0);
    }
};

inline void condition_vector(const LmParams& p, std::span<const TokenId> ids, std::size_t b, std::size_t e,
                             std::vector<double>& cond) {
    const std::size_t d = p.shape.dim;
    std::fill(cond.begin(), cond.end(), 0.0);
    if (e <= b) return;
    for (std::size_t t = b; t < e; ++t)
        for (std::size_t i = 0; i < d; ++i) cond[i] += p.embed[ids[t] * d + i];
    const double inv = 1.0 / static_cast<double>(e - b);
    for (auto& v : cond) v *= inv;
}

/// Fills ws.z/hid/logits for predicting the token at position t of `ids`
/// (only ids[0..t) are read).
inline void forward(const LmParams& p, std::span<const TokenId> ids, std::size_t t, Workspace& ws) {
    const auto& s = p.shape;
    const std::size_t d = s.dim, H = s.hidden, V = s.vocab;
    std::fill(ws.z.begin(), ws.z.end(), 0.0);
    for (std::size_t k = 0; k < s.window; ++k) {
        const auto j = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(s.window) + static_cast<std::ptrdiff_t>(k);
        if (j < 0) continue;  // zero padding before the start
        std::copy_n(p.embed.begin() + static_cast<std::ptrdiff_t>(ids[static_cast<std::size_t>(j)] * d), d,
                    ws.z.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    std::copy(ws.cond.begin(), ws.cond.end(), ws.z.begin() + static_cast<std::ptrdiff_t>(s.window * d));

    std::copy(p.b_hidden.begin(), p.b_hidden.end(), ws.hid.begin());
    for (std::size_t i = 0; i < ws.z.size(); ++i) {
        const double zi = ws.z[i];
        if (zi == 0.0) continue;
        const double* row = &p.w_hidden[i * H];
        for (std::size_t j = 0; j < H; ++j) ws.hid[j] += zi * row[j];
    }
    for (auto& h : ws.hid) h = std::tanh(h);

    std::copy(p.b_out.begin(), p.b_out.end(), ws.logits.begin());
    for (std::size_t j = 0; j < H; ++j) {
        const double hj = ws.hid[j];
        const double* row = &p.w_out[j * V];
        for (std::size_t v = 0; v < V; ++v) ws.logits[v] += hj * row[v];
    }
}

/// log-softmax over `logits` restricted to entries where allowed[v] (all if
/// `allowed` is empty). Disallowed entries get -inf.
inline void log_softmax(const std::vector<double>& logits, const std::vector<bool>& allowed, std::vector<double>& out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < logits.size(); ++v)
        if (allowed.empty() || allowed[v]) mx = std::max(mx, logits[v]);
    double sum = 0;
    for (std::size_t v = 0; v < logits.size(); ++v)
        if (allowed.empty() || allowed[v]) sum += std::exp(logits[v] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t v = 0; v < logits.size(); ++v)
        out[v] = (allowed.empty() || allowed[v]) ? logits[v] - lse : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// sum_{t>=1} log p(s_t | s_<t, x) under the full softmax.
inline double sequence_logprob(const LmParams& p, const TokenizedSequence& seq) {
    if (seq.ids.empty() || seq.ids[0] != kSosId) throw DataError("sequence must begin with [SOS]");
    for (auto id : seq.ids)
        if (id >= p.shape.vocab) throw DataError("token id outside the vocabulary");
    detail::Workspace ws;
    ws.resize(p.shape);
    detail::condition_vector(p, seq.ids, seq.cond_begin, seq.cond_end, ws.cond);
    double total = 0;
    for (std::size_t t = 1; t < seq.ids.size(); ++t) {
        detail::forward(p, seq.ids, t, ws);
        detail::log_softmax(ws.logits, {}, ws.probs);
        total += ws.probs[seq.ids[t]];
    }
    return total;
}

inline double sequence_logprob(const ListLm& m, std::string_view text, bool allow_unk = true) {
    return sequence_logprob(m.params(), m.tokenize(text, allow_unk));
}

/// Adds d log P(seq) / d theta into `grad`; returns log P(seq).
inline double accumulate_gradient(const LmParams& p, const TokenizedSequence& seq, LmParams& grad) {
    const auto& s = p.shape;
    const std::size_t d = s.dim, H = s.hidden, V = s.vocab;
    detail::Workspace ws;
    ws.resize(s);
    detail::condition_vector(p, seq.ids, seq.cond_begin, seq.cond_end, ws.cond);
    std::vector<double> dcond(d, 0.0);
    double total = 0;

    for (std::size_t t = 1; t < seq.ids.size(); ++t) {
        detail::forward(p, seq.ids, t, ws);
        detail::log_softmax(ws.logits, {}, ws.probs);
        total += ws.probs[seq.ids[t]];

        // d logp / d logits = onehot - softmax
        for (std::size_t v = 0; v < V; ++v) ws.dlogits[v] = -std::exp(ws.probs[v]);
        ws.dlogits[seq.ids[t]] += 1.0;

        for (std::size_t v = 0; v < V; ++v) grad.b_out[v] += ws.dlogits[v];
        for (std::size_t j = 0; j < H; ++j) {
            const double hj = ws.hid[j];
            double* grow = &grad.w_out[j * V];
            const double* wrow = &p.w_out[j * V];
            double acc = 0;
            for (std::size_t v = 0; v < V; ++v) {
                grow[v] += hj * ws.dlogits[v];
                acc += wrow[v] * ws.dlogits[v];
            }
            ws.dhid[j] = acc * (1.0 - hj * hj);
        }
        for (std::size_t j = 0; j < H; ++j) grad.b_hidden[j] += ws.dhid[j];
        for (std::size_t i = 0; i < ws.z.size(); ++i) {
            const double zi = ws.z[i];
            double* grow = &grad.w_hidden[i * H];
            const double* wrow = &p.w_hidden[i * H];
            double acc = 0;
            for (std::size_t j = 0; j < H; ++j) {
                grow[j] += zi * ws.dhid[j];
                acc += wrow[j] * ws.dhid[j];
            }
            ws.dz[i] = acc;
        }
        for (std::size_t k = 0; k < s.window; ++k) {
            const auto j = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(s.window) + static_cast<std::ptrdiff_t>(k);
            if (j < 0) continue;
            double* e = &grad.embed[seq.ids[static_cast<std::size_t>(j)] * d];
            for (std::size_t i = 0; i < d; ++i) e[i] += ws.dz[k * d + i];
        }
        for (std::size_t i = 0; i < d; ++i) dcond[i] += ws.dz[s.window * d + i];
    }
    if (seq.cond_end > seq.cond_begin) {
        const double inv = 1.0 / static_cast<double>(seq.cond_end - seq.cond_begin);
        for (std::size_t t = seq.cond_begin; t < seq.cond_end; ++t) {
            double* e = &grad.embed[seq.ids[t] * d];
            for (std::size_t i = 0; i < d; ++i) e[i] += dcond[i] * inv;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// decoding

/// Tokens the decoder may emit: everything except [SOS] and [UNK].
inline std::vector<bool> emit_mask(const Vocab& v) {
    std::vector<bool> allowed(v.size(), true);
    allowed[kSosId] = false;
    allowed[kUnkId] = false;
    return allowed;
}

/// Decoder next-token log-probabilities after `context` (which starts with
/// [SOS]); renormalized over emittable tokens.
inline std::vector<double> next_token_logprobs(const ListLm& m, std::span<const TokenId> context,
                                               std::size_t cond_begin, std::size_t cond_end) {
    detail::Workspace ws;
    ws.resize(m.shape());
    detail::condition_vector(m.params(), context, cond_begin, cond_end, ws.cond);
    detail::forward(m.params(), context, context.size(), ws);
    std::vector<double> out(m.shape().vocab);
    detail::log_softmax(ws.logits, emit_mask(m.vocab()), out);
    return out;
}

struct BeamOptions {
    std::size_t beam = 5;
    std::size_t max_len = 48;
    bool no_repeat_concept = false;
};

struct BeamResult {
    std::vector<TokenId> tokens;  // continuation, including the final [EOS] if finished
    double logprob = 0.0;
    bool finished = false;
};

namespace detail {

struct Hyp {
    std::vector<TokenId> cont;
    double score = 0.0;
};

inline bool hyp_before(const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cont < b.cont;
}

/// The concept segment that `next` (a marker or [EOS]) would close repeats
/// an earlier segment of the same list.
inline bool closes_repeat(const Vocab& vocab, std::span<const TokenId> ctx) {
    std::vector<std::vector<TokenId>> segs;
    std::vector<TokenId> cur;
    bool in_list = false;
    for (auto id : ctx) {
        if (vocab.is_marker(id)) {
            if (in_list) segs.push_back(cur);
            cur.clear();
            in_list = true;
        } else if (in_list) {
            cur.push_back(id);
        }
    }
    if (!in_list || cur.empty()) return false;
    return std::find(segs.begin(), segs.end(), cur) != segs.end();
}

}  // namespace detail

/// Beam search over continuations of `prompt`. A hypothesis is complete when
/// it emits [EOS]; search stops once no live hypothesis can still beat the
/// best complete one (scores only decrease). Ties: lexicographic token ids.
inline BeamResult beam_decode(const ListLm& m, const TokenizedSequence& prompt, const BeamOptions& opt) {
    if (opt.beam == 0) throw ConfigError("beam width must be >= 1", "model.beam");
    const auto& vocab = m.vocab();
    const std::size_t V = vocab.size();
    std::vector<detail::Hyp> live{{}}, done;
    std::vector<TokenId> ctx;

    for (std::size_t step = 0; step < opt.max_len && !live.empty(); ++step) {
        std::vector<detail::Hyp> cand;
        for (const auto& h : live) {
            ctx.assign(prompt.ids.begin(), prompt.ids.end());
            ctx.insert(ctx.end(), h.cont.begin(), h.cont.end());
            auto lp = next_token_logprobs(m, ctx, prompt.cond_begin, prompt.cond_end);
            // only the best `beam` extensions of one hypothesis can survive
            std::vector<TokenId> order;
            for (TokenId v = 0; v < V; ++v)
                if (std::isfinite(lp[v])) order.push_back(v);
            std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return lp[a] > lp[b]; });
            std::size_t taken = 0;
            for (auto v : order) {
                if (taken == opt.beam) break;
                if (opt.no_repeat_concept && (v == kEosId || vocab.is_marker(v)) && detail::closes_repeat(vocab, ctx))
                    continue;
                detail::Hyp nh{h.cont, h.score + lp[v]};
                nh.cont.push_back(v);
                cand.push_back(std::move(nh));
                ++taken;
            }
        }
        std::sort(cand.begin(), cand.end(), detail::hyp_before);
        if (cand.size() > opt.beam) cand.resize(opt.beam);
        live.clear();
        for (auto& c : cand) (c.cont.back() == kEosId ? done : live).push_back(std::move(c));
        if (!done.empty()) {
            std::sort(done.begin(), done.end(), detail::hyp_before);
            if (live.empty() || live.front().score <= done.front().score) break;
        }
    }
    if (!done.empty()) {
        std::sort(done.begin(), done.end(), detail::hyp_before);
        return {done.front().cont, done.front().score, true};
    }
    std::sort(live.begin(), live.end(), detail::hyp_before);
    if (live.empty()) return {};
    return {live.front().cont, live.front().score, false};
}

// ---------------------------------------------------------------------------
// training

struct PhaseConfig {
    std::size_t epochs = 20;
    double lr = 0.05;
    std::size_t decay_after = 10;  // epochs at constant lr before decay
    double decay = 0.85;           // per-epoch multiplier after decay_after
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    bool select_best = true;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_logprob = 0.0;  // mean per sequence
    std::optional<double> dev_score;
};

struct PhaseLog {
    std::string tag;
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    std::optional<double> best_score;
};

/// Dev-set score used for checkpoint selection (higher is better).
using Validator = std::function<double(const ListLm&)>;

/// Mini-batch stochastic gradient ascent on the summed log-likelihood of
/// `corpus`. With a validator and select_best, the returned model holds the
/// parameters of the epoch with the best dev score.
inline PhaseLog train_phase(ListLm& model, const std::vector<TokenizedSequence>& corpus, const PhaseConfig& cfg,
                            const Validator& validate = {}, const std::string& tag = "phase") {
    if (corpus.empty()) throw DataError("training corpus for " + tag + " is empty");
    if (cfg.batch_size == 0 || !(cfg.lr > 0)) throw ConfigError("batch size and learning rate must be positive", "model");
    PhaseLog log;
    log.tag = tag;
    auto& params = model.params();
    LmParams grad = LmParams::zeros(params.shape);
    std::optional<LmParams> best;
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.seed, {stable_hash(tag), epoch});
        std::shuffle(order.begin(), order.end(), rng);
        double lr = cfg.lr;
        if (epoch > cfg.decay_after) lr *= std::pow(cfg.decay, static_cast<double>(epoch - cfg.decay_after));
        double sum_lp = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            grad.set_zero();
            for (std::size_t i = start; i < stop; ++i) sum_lp += accumulate_gradient(params, corpus[order[i]], grad);
            params.axpy(lr / static_cast<double>(stop - start), grad);
            if (!std::isfinite(sum_lp) || !params.finite())
                throw RuntimeError(tag + ": training diverged at epoch " + std::to_string(epoch) + ", batch starting " +
                                   std::to_string(start) + " (lr=" + std::to_string(lr) + ")");
        }
        EpochLog e{epoch, sum_lp / static_cast<double>(corpus.size()), std::nullopt};
        if (validate) {
            e.dev_score = validate(model);
            if (cfg.select_best && (!log.best_score || *e.dev_score > *log.best_score)) {
                log.best_score = e.dev_score;
                log.best_epoch = epoch;
                best = params;
            }
        }
        log.epochs.push_back(e);
    }
    if (best) params = std::move(*best);
    else log.best_epoch = cfg.epochs;
    model.phases.push_back(tag);
    return log;
}

// ---------------------------------------------------------------------------
// checkpoints

inline constexpr int kCheckpointVersion = 1;

inline json checkpoint_to_json(const ListLm& m, const Provenance& prov) {
    const auto& p = m.params();
    return {{"schema", "ccgen.listlm"},
            {"version", kCheckpointVersion},
            {"provenance", prov.to_json()},
            {"V", p.shape.vocab},
            {"d", p.shape.dim},
            {"H", p.shape.hidden},
            {"h", p.shape.window},
            {"seed", m.seed},
            {"phases", m.phases},
            {"format", m.format},
            {"relation", m.grammar().relation},
            {"vocab", m.vocab().tokens()},
            {"embed", p.embed},
            {"w_hidden", p.w_hidden},
            {"b_hidden", p.b_hidden},
            {"w_out", p.w_out},
            {"b_out", p.b_out}};
}

inline ListLm checkpoint_from_json(const json& j) {
    if (j.value("schema", "") != "ccgen.listlm") throw DataError("not a list-model checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    try {
        LmShape s{j.at("V").get<std::size_t>(), j.at("d").get<std::size_t>(), j.at("H").get<std::size_t>(),
                  j.at("h").get<std::size_t>()};
        LmParams p = LmParams::zeros(s);
        p.embed = j.at("embed").get<std::vector<double>>();
        p.w_hidden = j.at("w_hidden").get<std::vector<double>>();
        p.b_hidden = j.at("b_hidden").get<std::vector<double>>();
        p.w_out = j.at("w_out").get<std::vector<double>>();
        p.b_out = j.at("b_out").get<std::vector<double>>();
        auto ref = LmParams::zeros(s);
        auto a = p.blocks();
        auto b = ref.blocks();
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i]->size() != b[i]->size()) throw DataError("checkpoint weight block has the wrong size");
        ListLm m(Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>()), std::move(p),
                 Grammar{j.at("relation").get<std::string>()});
        m.seed = j.at("seed").get<std::uint64_t>();
        m.phases = j.at("phases").get<std::vector<std::string>>();
        m.format = j.value("format", "plain");
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const ListLm& m, const std::string& path, const Provenance& prov) {
    write_text_file(path, checkpoint_to_json(m, prov).dump() + "\n");
}

inline ListLm load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

}  // namespace ccgen::lm

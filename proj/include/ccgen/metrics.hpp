#pragma once

// Dedup-aware ACC@k per list position, overall accuracy, confidence-weighted
// nDCG, valid rate, sequential (prefix-given) evaluation and frequency
// bucketed reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/io.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

/// conf(x, .) total orders for every listed concept, plus the reference lists.
class GroundTruth {
public:
    GroundTruth(ConfidenceTable table, std::map<ConceptId, RankedList> lists)
        : table_(std::move(table)), lists_(std::move(lists)) {
        for (const auto& [x, l] : lists_) {
            auto& ranks = ranks_[x];
            auto partners = sorted_partners(table_, x);
            for (std::size_t i = 0; i < partners.size(); ++i) ranks.emplace(partners[i].concept_id, i + 1);
        }
    }

    explicit GroundTruth(const Dataset& d) : GroundTruth(d.table, d.lists) {}

    bool has(ConceptId x) const { return lists_.count(x) != 0; }

    const RankedList& list(ConceptId x) const {
        auto it = lists_.find(x);
        if (it == lists_.end()) throw DataError("no ground truth for concept id " + std::to_string(x));
        return it->second;
    }

    /// 1-based rank of y in x's confidence order; nullopt = unranked
    /// (invalid slot or zero confidence).
    std::optional<std::size_t> rank_of(ConceptId x, std::optional<ConceptId> y) const {
        if (!y) return std::nullopt;
        auto it = ranks_.find(x);
        if (it == ranks_.end()) throw DataError("no ground truth for concept id " + std::to_string(x));
        auto jt = it->second.find(*y);
        if (jt == it->second.end()) return std::nullopt;
        return jt->second;
    }

    double conf(ConceptId x, ConceptId y) const { return table_.conf(x, y); }
    std::uint64_t freq(ConceptId x) const { return table_.freq(x); }
    const ConfidenceTable& table() const noexcept { return table_; }

private:
    ConfidenceTable table_;
    std::map<ConceptId, RankedList> lists_;
    std::map<ConceptId, std::unordered_map<ConceptId, std::size_t>> ranks_;
};

namespace detail {

inline ConceptId require_input(const PredictionRecord& r, const GroundTruth& truth) {
    if (!r.input_id) throw DataError("prediction input '" + r.input + "' is not in the concept set");
    if (!truth.has(*r.input_id)) throw DataError("prediction input '" + r.input + "' has no ground-truth list");
    return *r.input_id;
}

inline bool earlier_duplicate(const PredictionRecord& r, int m, ConceptId y) {
    for (const auto& s : r.slots)
        if (s.position < m && s.concept_id && *s.concept_id == y) return true;
    return false;
}

inline void require_nonempty(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw DataError("cannot score an empty prediction set");
}

}  // namespace detail

/// 1[rank(y'_m) <= k and y'_m not among y'_1..y'_{m-1}] for one record.
inline bool position_hit(const PredictionRecord& r, const GroundTruth& truth, int m, std::size_t k) {
    const ConceptId x = detail::require_input(r, truth);
    const Slot* s = r.slot_at(m);
    if (!s || !s->concept_id) return false;
    auto rank = truth.rank_of(x, s->concept_id);
    return rank && *rank <= k && !detail::earlier_duplicate(r, m, *s->concept_id);
}

inline double acc_at_k(const std::vector<PredictionRecord>& records, const GroundTruth& truth, int m,
                       std::size_t k = 10) {
    detail::require_nonempty(records);
    double hits = 0;
    for (const auto& r : records) hits += position_hit(r, truth, m, k) ? 1.0 : 0.0;
    return hits / static_cast<double>(records.size());
}

inline double acc_overall(const std::vector<PredictionRecord>& records, const GroundTruth& truth, int m = 5,
                          std::size_t k = 10) {
    double s = 0;
    for (int i = 1; i <= m; ++i) s += acc_at_k(records, truth, i, k);
    return s / static_cast<double>(m);
}

/// DCG_m / iDCG_m for one record; w(y') = conf(x, y') unless y' repeats an
/// earlier slot or is invalid.
inline double record_ndcg(const PredictionRecord& r, const GroundTruth& truth, int m = 5) {
    const ConceptId x = detail::require_input(r, truth);
    const auto& gold = truth.list(x).targets;
    if (gold.size() < static_cast<std::size_t>(m))
        throw DataError("ground-truth list for '" + r.input + "' is shorter than " + std::to_string(m));
    double idcg = 0;
    for (int i = 1; i <= m; ++i) idcg += gold[i - 1].confidence / std::log2(i + 1.0);
    if (!(idcg > 0)) throw DataError("iDCG is zero for '" + r.input + "'");
    double dcg = 0;
    for (int i = 1; i <= m; ++i) {
        const Slot* s = r.slot_at(i);
        double w = 0;
        if (s && s->concept_id && !detail::earlier_duplicate(r, i, *s->concept_id)) w = truth.conf(x, *s->concept_id);
        dcg += w / std::log2(i + 1.0);
    }
    return dcg / idcg;
}

inline double ndcg(const std::vector<PredictionRecord>& records, const GroundTruth& truth, int m = 5) {
    detail::require_nonempty(records);
    double s = 0;
    for (const auto& r : records) s += record_ndcg(r, truth, m);
    return s / static_cast<double>(records.size());
}

/// Fraction of generated slots (given prefix slots excluded) naming a
/// concept in the set. Zero slots overall gives 0.
inline double valid_rate(const std::vector<PredictionRecord>& records) {
    std::size_t total = 0, valid = 0;
    for (const auto& r : records)
        for (const auto& s : r.slots) {
            if (s.position <= r.prefix_len) continue;
            ++total;
            valid += s.valid() ? 1 : 0;
        }
    return total == 0 ? 0.0 : static_cast<double>(valid) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// reports

struct MetricReport {
    std::string name;
    std::string mode = "plain";
    std::size_t k = 10;
    std::size_t n_test = 0;
    std::map<int, double> acc;  // position -> ACC@k_m
    std::optional<double> overall;
    std::optional<double> ndcg;
    int ndcg_m = 5;
    std::optional<double> valid_rate;

    json to_json() const {
        json j = {{"name", name}, {"mode", mode}, {"k", k}, {"n_test", n_test}, {"ndcg_m", ndcg_m}};
        json acc_j = json::object();
        for (const auto& [m, v] : acc) acc_j[std::to_string(m)] = v;
        j["acc_at_k"] = acc_j;
        j["overall"] = overall ? json(*overall) : json(nullptr);
        j["ndcg"] = ndcg ? json(*ndcg) : json(nullptr);
        j["valid_rate"] = valid_rate ? json(*valid_rate) : json(nullptr);
        return j;
    }

    static MetricReport from_json(const json& j) {
        MetricReport r;
        r.name = j.value("name", "");
        r.mode = j.value("mode", "plain");
        r.k = j.value("k", std::size_t{10});
        r.n_test = j.value("n_test", std::size_t{0});
        r.ndcg_m = j.value("ndcg_m", 5);
        for (const auto& [m, v] : j.at("acc_at_k").items()) r.acc[std::stoi(m)] = v.get<double>();
        if (!j.at("overall").is_null()) r.overall = j.at("overall").get<double>();
        if (!j.at("ndcg").is_null()) r.ndcg = j.at("ndcg").get<double>();
        if (!j.at("valid_rate").is_null()) r.valid_rate = j.at("valid_rate").get<double>();
        return r;
    }
};

struct EvalOptions {
    std::size_t k = 10;
    std::vector<int> positions;  // empty: derived from records
    bool with_ndcg = true;
    int ndcg_m = 5;
    std::size_t list_size = 5;
    std::string mode = "plain";
    std::string name;
};

/// Positions a record set should be scored at: everything after the given
/// prefix up to the list size, or just the next position when the whole list
/// was given (the beyond-training-length probe).
inline std::vector<int> scored_positions(int prefix_len, std::size_t list_size) {
    std::vector<int> out;
    if (prefix_len >= static_cast<int>(list_size)) {
        out.push_back(prefix_len + 1);
        return out;
    }
    for (int m = prefix_len + 1; m <= static_cast<int>(list_size); ++m) out.push_back(m);
    return out;
}

inline MetricReport evaluate(const std::vector<PredictionRecord>& records, const GroundTruth& truth,
                             const EvalOptions& opt = {}) {
    detail::require_nonempty(records);
    MetricReport rep;
    rep.name = opt.name;
    rep.mode = opt.mode;
    rep.k = opt.k;
    rep.n_test = records.size();
    rep.ndcg_m = opt.ndcg_m;

    auto positions = opt.positions;
    const int prefix = records.front().prefix_len;
    if (positions.empty()) {
        for (const auto& r : records)
            if (r.prefix_len != prefix) throw DataError("prediction records mix different prefix lengths");
        positions = scored_positions(prefix, opt.list_size);
    }
    for (int m : positions) rep.acc[m] = acc_at_k(records, truth, m, opt.k);
    if (positions.size() > 1) {
        double s = 0;
        for (const auto& [m, v] : rep.acc) s += v;
        rep.overall = s / static_cast<double>(rep.acc.size());
    }
    if (opt.with_ndcg && prefix == 0 && positions.size() > 1) rep.ndcg = ndcg(records, truth, opt.ndcg_m);
    rep.valid_rate = valid_rate(records);
    return rep;
}

/// Per-record hits and nDCG, one JSON object per record.
inline std::vector<json> per_concept_breakdown(const std::vector<PredictionRecord>& records, const GroundTruth& truth,
                                               const EvalOptions& opt = {}) {
    std::vector<json> out;
    for (const auto& r : records) {
        json hits = json::object();
        auto positions = opt.positions.empty() ? scored_positions(r.prefix_len, opt.list_size) : opt.positions;
        for (int m : positions) hits[std::to_string(m)] = position_hit(r, truth, m, opt.k);
        json j = {{"input", r.input}, {"hits", hits}};
        if (r.prefix_len == 0) j["ndcg"] = record_ndcg(r, truth, opt.ndcg_m);
        out.push_back(std::move(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// sequential evaluation

enum class PrefixMode { plain, given_top_n, given_sampled_top10_n, given_sampled_all_n };

inline PrefixMode parse_prefix_mode(std::string_view s) {
    if (s == "plain") return PrefixMode::plain;
    if (s == "given_top_n") return PrefixMode::given_top_n;
    if (s == "given_sampled_top10_n") return PrefixMode::given_sampled_top10_n;
    if (s == "given_sampled_all_n") return PrefixMode::given_sampled_all_n;
    throw ConfigError("unknown prefix mode '" + std::string(s) + "'", "eval.prefix_mode");
}

inline std::string mode_tag(PrefixMode mode, std::size_t n) {
    switch (mode) {
        case PrefixMode::plain: return "plain";
        case PrefixMode::given_top_n: return "+" + std::to_string(n);
        case PrefixMode::given_sampled_top10_n: return "+" + std::to_string(n) + " (top 10)";
        case PrefixMode::given_sampled_all_n: return "+" + std::to_string(n) + " (all)";
    }
    return "plain";
}

struct SequentialOptions {
    PrefixMode mode = PrefixMode::plain;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    bool probe_next = false;  // score position n+1 when n == list size
    std::size_t list_size = 5;
    std::size_t k = 10;
};

inline void validate_sequential(const SequentialOptions& opt) {
    if (opt.mode == PrefixMode::plain) {
        if (opt.n != 0) throw ConfigError("plain mode takes no prefix (n must be 0)", "eval.n");
        return;
    }
    if (opt.n == 0) throw ConfigError("prefix modes need n >= 1", "eval.n");
    if (opt.n >= opt.list_size && !(opt.probe_next && opt.n == opt.list_size))
        throw ConfigError("n=" + std::to_string(opt.n) + " leaves no position to score; use n=" +
                              std::to_string(opt.list_size) + " with the position probe",
                          "eval.n");
}

/// Prefix handed to the generator for x under `opt`. Random modes draw from
/// a stream keyed by (seed, x), so results do not depend on evaluation order.
inline std::vector<ConceptId> build_prefix(ConceptId x, const GroundTruth& truth, std::size_t universe,
                                           const SequentialOptions& opt) {
    const auto& gold = truth.list(x).targets;
    std::vector<ConceptId> out;
    switch (opt.mode) {
        case PrefixMode::plain: break;
        case PrefixMode::given_top_n:
            for (std::size_t i = 0; i < opt.n && i < gold.size(); ++i) out.push_back(gold[i].concept_id);
            break;
        case PrefixMode::given_sampled_top10_n: {
            Rng rng = make_rng(opt.seed, {x, 0x7010});
            std::vector<std::size_t> idx(std::min<std::size_t>(10, gold.size()));
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(std::min(opt.n, idx.size()));
            std::sort(idx.begin(), idx.end());  // keep ground-truth rank order
            for (auto i : idx) out.push_back(gold[i].concept_id);
            break;
        }
        case PrefixMode::given_sampled_all_n: {
            Rng rng = make_rng(opt.seed, {x, 0xa11});
            std::vector<ConceptId> pool;
            for (ConceptId c = 0; c < universe; ++c)
                if (c != x) pool.push_back(c);
            for (std::size_t i = 0; i < opt.n && i < pool.size(); ++i) {
                std::size_t j = i + uniform_index(rng, pool.size() - i);
                std::swap(pool[i], pool[j]);
                out.push_back(pool[i]);
            }
            break;
        }
    }
    return out;
}

using Generator = std::function<PredictionRecord(ConceptId x, const std::vector<ConceptId>& prefix)>;

struct SequentialResult {
    MetricReport report;
    std::vector<PredictionRecord> records;
};

inline SequentialResult sequential_evaluate(const Generator& generate, const GroundTruth& truth,
                                            const std::vector<ConceptId>& concepts, std::size_t universe,
                                            const SequentialOptions& opt) {
    validate_sequential(opt);
    if (concepts.empty()) throw DataError("no concepts to evaluate");
    SequentialResult res;
    for (auto x : concepts) {
        auto prefix = build_prefix(x, truth, universe, opt);
        auto rec = generate(x, prefix);
        rec.prefix_len = static_cast<int>(prefix.size());
        res.records.push_back(std::move(rec));
    }
    EvalOptions eo;
    eo.k = opt.k;
    eo.list_size = opt.list_size;
    eo.mode = mode_tag(opt.mode, opt.n);
    eo.positions = scored_positions(static_cast<int>(opt.n), opt.list_size);
    eo.with_ndcg = opt.mode == PrefixMode::plain;
    res.report = evaluate(res.records, truth, eo);
    return res;
}

// ---------------------------------------------------------------------------
// frequency buckets

struct BucketReport {
    std::uint64_t lo = 0;
    std::uint64_t hi = std::numeric_limits<std::uint64_t>::max();  // exclusive
    std::size_t n = 0;
    std::optional<MetricReport> report;  // absent when the bucket is empty

    std::string label() const {
        if (hi == std::numeric_limits<std::uint64_t>::max()) return "freq>=" + std::to_string(lo);
        if (lo == 0) return "freq<" + std::to_string(hi);
        return std::to_string(lo) + "<=freq<" + std::to_string(hi);
    }
};

inline std::vector<BucketReport> frequency_bucket_report(const std::vector<PredictionRecord>& records,
                                                         const GroundTruth& truth, std::vector<std::uint64_t> edges,
                                                         const EvalOptions& opt = {}) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<BucketReport> buckets;
    std::uint64_t lo = 0;
    for (auto e : edges) {
        if (e == 0) continue;
        buckets.push_back({lo, e, 0, std::nullopt});
        lo = e;
    }
    buckets.push_back({lo, std::numeric_limits<std::uint64_t>::max(), 0, std::nullopt});

    std::vector<std::vector<PredictionRecord>> parts(buckets.size());
    for (const auto& r : records) {
        const auto f = truth.freq(detail::require_input(r, truth));
        for (std::size_t b = 0; b < buckets.size(); ++b)
            if (f >= buckets[b].lo && f < buckets[b].hi) {
                parts[b].push_back(r);
                break;
            }
    }
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        buckets[b].n = parts[b].size();
        if (!parts[b].empty()) {
            auto o = opt;
            o.name = buckets[b].label();
            buckets[b].report = evaluate(parts[b], truth, o);
        }
    }
    return buckets;
}

// ---------------------------------------------------------------------------
// rendering

/// Aligned text table: one row per report, ACC@k per position, Overall,
/// nDCG and VR, all x100 with two decimals; '-' marks absent cells.
inline std::string render_table(const std::vector<MetricReport>& rows) {
    std::set<int> positions = {1, 2, 3, 4, 5};
    for (const auto& r : rows)
        for (const auto& [m, v] : r.acc) positions.insert(m);
    std::size_t name_w = 18;
    for (const auto& r : rows) {
        auto label = r.name.empty() ? r.mode : r.name + (r.mode == "plain" ? "" : " " + r.mode);
        name_w = std::max(name_w, label.size());
    }
    auto cell = [](std::optional<double> v, std::size_t w) {
        char buf[32];
        if (v) std::snprintf(buf, sizeof buf, "%*.2f", static_cast<int>(w), *v * 100.0);
        else std::snprintf(buf, sizeof buf, "%*s", static_cast<int>(w), "-");
        return std::string(buf);
    };
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    std::string out = pad("Model / Score (%)", name_w);
    char buf[32];
    for (int m : positions) {
        std::snprintf(buf, sizeof buf, "%7d", m);
        out += buf;
    }
    out += "  Overall     nDCG       VR\n";
    for (const auto& r : rows) {
        auto label = r.name.empty() ? r.mode : r.name + (r.mode == "plain" ? "" : " " + r.mode);
        out += pad(label, name_w);
        for (int m : positions) {
            auto it = r.acc.find(m);
            out += cell(it == r.acc.end() ? std::nullopt : std::optional<double>(it->second), 7);
        }
        out += cell(r.overall, 9) + cell(r.ndcg, 9) + cell(r.valid_rate, 9) + "\n";
    }
    return out;
}

}  // namespace ccgen

// ccgen: build datasets, train list models and baselines, distill
// explanations, generate and score complementary concept lists.

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccgen/ccgen.hpp"

namespace fs = std::filesystem;
using namespace ccgen;

namespace {

struct Globals {
    std::string config_file;
    std::vector<std::string> overrides;
    bool quiet = false;
};

/// Flag values win over the config file: each given flag becomes an override.
class Overrides {
public:
    template <class T>
    void add(const std::string& key, const std::optional<T>& v) {
        if (v) extra_.push_back(merge(key, json(*v)));
    }
    void add_json(const std::string& key, const json& v) { extra_.push_back(merge(key, v)); }

    RunConfig load(const Globals& g) const {
        auto cfg = load_run_config(g.config_file, g.overrides);
        json doc = cfg.doc;
        for (const auto& e : extra_) doc = merge_config(std::move(doc), e);
        return RunConfig(std::move(doc));
    }

private:
    static json merge(const std::string& key, const json& v) {
        json out = v;
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (auto dot = key.find('.');; dot = key.find('.', start)) {
            parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) out = json{{*it, out}};
        return out;
    }
    std::vector<json> extra_;
};

void emit_diag(const std::string& kind, const std::string& message, const std::string& field = {}) {
    json j = {{"error", kind}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    std::cerr << j.dump() << std::endl;
}

void note(const Globals& g, const json& j) {
    if (!g.quiet) std::cout << j.dump() << std::endl;
}

std::string require_path(const RunConfig& cfg, const char* key) {
    auto p = cfg.at("paths").at(key).get<std::string>();
    if (p.empty()) throw ConfigError(std::string("path is required (--") + key + ")", std::string("paths.") + key);
    if (!fs::exists(p)) throw ConfigError("path does not exist: " + p, std::string("paths.") + key);
    return p;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeError("cannot create directory '" + dir + "': " + ec.message());
}

json report_file_json(const MetricReport& r, const Provenance& p, const std::vector<BucketReport>* buckets = nullptr) {
    json j = {{"schema", "ccgen.report"}, {"version", 1}, {"provenance", p.to_json()}, {"report", r.to_json()}};
    if (buckets) {
        json b = json::array();
        for (const auto& br : *buckets) {
            json e = {{"label", br.label()}, {"lo", br.lo}, {"n", br.n}};
            if (br.hi != std::numeric_limits<std::uint64_t>::max()) e["hi"] = br.hi;
            e["report"] = br.report ? br.report->to_json() : json(nullptr);
            b.push_back(e);
        }
        j["buckets"] = b;
    }
    return j;
}

MetricReport load_report(const std::string& path) {
    auto j = read_json_file(path);
    if (j.contains("report")) return MetricReport::from_json(j.at("report"));
    return MetricReport::from_json(j);
}

std::vector<PredictionRecord> generate_records(const lm::ListLm& model, const Dataset& d, const GroundTruth& truth,
                                               const std::vector<ConceptId>& ids, const SequentialOptions& so,
                                               const lm::GenerateOptions& gopt) {
    std::vector<PredictionRecord> out;
    for (auto x : ids) {
        auto prefix = build_prefix(x, truth, d.concepts.size(), so);
        auto rec = lm::generate_list(model, d.concepts, d.concepts.at(x).surface, d.surfaces(prefix), gopt);
        rec.prefix_len = static_cast<int>(prefix.size());
        out.push_back(std::move(rec));
    }
    return out;
}

lm::GenerateOptions generation_for(const lm::ListLm& model, const RunConfig& cfg) {
    auto mc = cfg.model();
    auto g = lm::generate_options(mc, model.format == "explained", model.format == "single_target");
    g.source = "listlm:" + model.format;
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccgen: complementary concept generation harness"};
    app.set_help_all_flag("--help-all", "Show help for all subcommands");
    Globals g;
    app.add_option("--config", g.config_file, "JSON config file (flags > file > defaults)");
    app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");
    app.add_flag("-q,--quiet", g.quiet, "Suppress progress output on stdout");
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::function<void()> action;
    Overrides ov;

    // synth-gen -----------------------------------------------------------
    auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic world (catalog, behavior, vectors, graph)");
    std::string synth_out;
    std::optional<std::uint64_t> synth_seed;
    std::optional<std::size_t> synth_n, synth_baskets;
    std::optional<double> synth_noise, synth_density;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed);
    synth->add_option("--n-concepts", synth_n);
    synth->add_option("--baskets", synth_baskets);
    synth->add_option("--noise", synth_noise);
    synth->add_option("--density", synth_density);
    synth->callback([&] {
        action = [&] {
            ov.add("synth.seed", synth_seed);
            ov.add("synth.n_concepts", synth_n);
            ov.add("synth.baskets", synth_baskets);
            ov.add("synth.noise_rate", synth_noise);
            ov.add("synth.complement_graph_density", synth_density);
            auto cfg = ov.load(g);
            auto spec = cfg.synth();
            auto w = generate_synthetic_world(spec);
            write_synthetic_world(w, synth_out, cfg.provenance(spec.seed));
            note(g, {{"synth_gen", synth_out}, {"concepts", w.concepts.size()}, {"baskets", w.behavior.size()},
                     {"config_hash", cfg.hash()}});
        };
    });

    // build-dataset -------------------------------------------------------
    auto* build = app.add_subcommand("build-dataset", "Build the ranked-list dataset from catalog and behavior logs");
    std::optional<std::string> b_concepts, b_catalog, b_behavior;
    std::string b_out, b_table;
    std::optional<std::uint64_t> b_min_freq, b_seed;
    std::optional<std::size_t> b_k;
    build->add_option("--concepts", b_concepts, "Concept-set file");
    build->add_option("--catalog", b_catalog, "Catalog JSON lines");
    build->add_option("--behavior", b_behavior, "Behavior JSON lines");
    build->add_option("--out", b_out, "Dataset file to write")->required();
    build->add_option("--table-text", b_table, "Also write the canonical confidence-table text");
    build->add_option("--min-freq", b_min_freq);
    build->add_option("--k-collect", b_k);
    build->add_option("--seed", b_seed, "Split seed");
    build->callback([&] {
        action = [&] {
            ov.add("paths.concepts", b_concepts);
            ov.add("paths.catalog", b_catalog);
            ov.add("paths.behavior", b_behavior);
            ov.add("dataset.min_freq", b_min_freq);
            ov.add("dataset.k_collect", b_k);
            ov.add("dataset.seed", b_seed);
            auto cfg = ov.load(g);
            auto opt = cfg.dataset();
            auto raw = load_concept_set(require_path(cfg, "concepts"));
            auto catalog = read_catalog(require_path(cfg, "catalog"));
            auto behavior = read_behavior(require_path(cfg, "behavior"));
            auto d = build_dataset(raw, catalog, behavior, opt);
            d.provenance = cfg.provenance(opt.seed);
            save_dataset(d, b_out);
            if (!b_table.empty())  // full table, not the list-restricted copy kept in the dataset
                write_text_file(b_table, canonical_table_text(build_confidence_table(catalog, behavior, d.concepts),
                                                              d.lists, d.concepts));
            note(g, {{"dataset", b_out}, {"concepts", d.concepts.size()}, {"lists", d.lists.size()},
                     {"train", d.splits.train.size()}, {"dev", d.splits.dev.size()}, {"test", d.splits.test.size()}});
        };
    });

    // train-baseline ------------------------------------------------------
    auto* tb = app.add_subcommand("train-baseline", "Train a baseline and write its predictions");
    std::string tb_kind, tb_dataset, tb_out, tb_split = "test";
    std::optional<std::string> tb_vectors;
    std::optional<std::size_t> tb_epochs, tb_knn_k;
    std::optional<std::uint64_t> tb_seed;
    tb->add_option("kind", tb_kind, "glove | knn | pair | item2vec | companion")
        ->required()
        ->check(CLI::IsMember({"glove", "knn", "pair", "item2vec", "companion"}));
    tb->add_option("--dataset", tb_dataset)->required();
    tb->add_option("--vectors", tb_vectors, "Word-vector text file");
    tb->add_option("--out-dir", tb_out)->required();
    tb->add_option("--split", tb_split)->check(CLI::IsMember({"train", "dev", "test"}));
    tb->add_option("--epochs", tb_epochs);
    tb->add_option("--knn-k", tb_knn_k);
    tb->add_option("--seed", tb_seed);
    tb->callback([&] {
        action = [&] {
            ov.add("paths.vectors", tb_vectors);
            ov.add("baselines.epochs", tb_epochs);
            ov.add("baselines.knn_k", tb_knn_k);
            ov.add("baselines.seed", tb_seed);
            auto cfg = ov.load(g);
            const auto& bj = cfg.at("baselines");
            const auto n = bj["list_size"].get<std::size_t>();
            const auto seed = bj["seed"].get<std::uint64_t>();
            auto d = load_dataset(tb_dataset);
            auto vectors = load_word_vectors(require_path(cfg, "vectors"), cfg.at("embed")["lowercase"].get<bool>());
            auto emb = compose_all(d.concepts, vectors);
            ensure_dir(tb_out);
            const auto prov = cfg.provenance(seed);
            const auto& ids = d.split(tb_split);
            std::vector<PredictionRecord> recs;
            json ckpt;
            auto sgd = cfg.baseline_sgd(tb_kind == "pair");
            if (tb_kind == "glove") {
                ckpt = baseline_header("glove", vectors.dim(), seed, 0, prov);
                for (auto x : ids) recs.push_back(glove_rank(x, emb, d.concepts, n));
            } else if (tb_kind == "knn") {
                const auto k = bj["knn_k"].get<std::size_t>();
                ckpt = baseline_header("knn", vectors.dim(), seed, 0, prov);
                ckpt["model"] = {{"k_neighbors", k}};
                for (auto x : ids) recs.push_back(knn_rank(x, emb, d, d.splits.train, k, n));
            } else {
                auto pairs = build_pair_training_set(d, d.splits.train, bj["negatives"].get<std::size_t>(), seed);
                ckpt = baseline_header(tb_kind, vectors.dim(), seed, sgd.epochs, prov);
                if (tb_kind == "pair") {
                    auto m = train_pair_scorer(pairs, emb, sgd);
                    ckpt["model"] = to_json(m);
                    for (auto x : ids) recs.push_back(score_rank(m, x, emb, d.concepts, n));
                } else if (tb_kind == "item2vec") {
                    auto m = train_item2vec_context(pairs, emb, sgd);
                    ckpt["model"] = to_json(m);
                    for (auto x : ids) recs.push_back(item2vec_rank(m, x, emb, d.concepts, n));
                } else {
                    auto m = train_companion(pairs, emb, sgd, bj["margin"].get<double>());
                    ckpt["model"] = to_json(m);
                    for (auto x : ids) recs.push_back(companion_rank(m, x, emb, d.concepts, n));
                }
            }
            const auto model_path = tb_out + "/" + tb_kind + ".model.json";
            const auto pred_path = tb_out + "/" + tb_kind + ".predictions.jsonl";
            write_text_file(model_path, ckpt.dump() + "\n");
            write_predictions(pred_path, recs, prov, {{"mode", "plain"}, {"split", tb_split}, {"source", tb_kind}});
            note(g, {{"baseline", tb_kind}, {"checkpoint", model_path}, {"predictions", pred_path}});
        };
    });

    // train-lm ------------------------------------------------------------
    auto* tl = app.add_subcommand("train-lm", "Train the list-generation model");
    std::string tl_dataset, tl_out, tl_corpus;
    bool tl_two_step = false, tl_exp = false, tl_no_lg = false;
    std::optional<std::uint64_t> tl_seed;
    tl->add_option("--dataset", tl_dataset)->required();
    tl->add_option("--out-dir", tl_out)->required();
    tl->add_flag("--two-step", tl_two_step, "Unordered (permuted) phase before ordered training");
    tl->add_flag("--with-explanations", tl_exp, "Ordered phase on an explained corpus (see --corpus)");
    tl->add_option("--corpus", tl_corpus, "Explained corpus from distill-explanations");
    tl->add_flag("--no-lg", tl_no_lg, "Single-target ablation (one target per line)");
    tl->add_option("--seed", tl_seed);
    tl->callback([&] {
        action = [&] {
            ov.add("model.seed", tl_seed);
            auto cfg = ov.load(g);
            auto mc = cfg.model();
            if (tl_no_lg && (tl_two_step || tl_exp))
                throw ConfigError("--no-lg cannot be combined with --two-step or --with-explanations", "train-lm");
            if (tl_exp && tl_corpus.empty()) throw ConfigError("--with-explanations needs --corpus", "train-lm.corpus");
            auto d = load_dataset(tl_dataset);
            ensure_dir(tl_out);
            const auto prov = cfg.provenance(mc.seed);
            std::optional<std::vector<std::string>> explained;
            if (tl_exp) explained = read_corpus(tl_corpus);
            const auto* phase2 = explained ? &*explained : nullptr;

            lm::TrainedModels res = tl_no_lg     ? lm::ablation_single_target(d, mc)
                                    : tl_two_step ? lm::train_two_step(d, mc, phase2)
                                                  : lm::train_ordered_only(d, mc, phase2);
            if (tl_no_lg) {
                write_corpus(tl_out + "/corpus_single_target.txt", lm::single_target_corpus(d, d.splits.train, mc.grammar));
            } else {
                write_corpus(tl_out + "/corpus_ordered.txt", phase2 ? *phase2 : lm::ordered_corpus(d, d.splits.train, mc.grammar));
                if (tl_two_step)
                    write_corpus(tl_out + "/corpus_permuted.txt",
                                 lm::permutation_corpus(d, d.splits.train, mc.permutations, mc.seed, mc.grammar));
            }
            json log = {{"provenance", prov.to_json()}, {"phases", json::array()}};
            for (const auto& l : res.logs) log["phases"].push_back(lm::phase_log_json(l));
            write_text_file(tl_out + "/train_log.json", log.dump(1) + "\n");
            json out = {{"checkpoint", tl_out + "/lm.json"}};
            if (res.unordered) {
                lm::save_checkpoint(*res.unordered, tl_out + "/lm_unordered.json", prov);
                out["unordered_checkpoint"] = tl_out + "/lm_unordered.json";
            }
            lm::save_checkpoint(res.model, tl_out + "/lm.json", prov);
            note(g, out);
        };
    });

    // generate / sequential-eval ----------------------------------------
    struct GenArgs {
        std::string checkpoint, dataset, out, split = "test", prefix_mode = "plain", report_out;
        std::size_t n = 0;
        std::uint64_t seed = 0;
        bool probe6 = false;
        std::optional<std::size_t> beam;
    };
    GenArgs ga, sa;
    auto add_gen = [](CLI::App* c, GenArgs& a) {
        c->add_option("--checkpoint", a.checkpoint)->required();
        c->add_option("--dataset", a.dataset)->required();
        c->add_option("--split", a.split)->check(CLI::IsMember({"train", "dev", "test"}));
        c->add_option("--prefix-mode", a.prefix_mode)
            ->check(CLI::IsMember({"plain", "given_top_n", "given_sampled_top10_n", "given_sampled_all_n"}));
        c->add_option("--n", a.n, "Number of given prefix concepts");
        c->add_option("--seed", a.seed, "Prefix sampling seed");
        c->add_flag("--probe-6", a.probe6, "With n = list size, score the next (6th) position");
        c->add_option("--beam", a.beam);
    };
    auto run_gen = [&](const GenArgs& a, RunConfig& cfg, SequentialOptions& so) {
        auto d = load_dataset(a.dataset);
        so.mode = parse_prefix_mode(a.prefix_mode);
        so.n = a.n;
        so.seed = a.seed;
        so.probe_next = a.probe6;
        so.list_size = d.target_size;
        so.k = cfg.k();
        validate_sequential(so);
        auto model = lm::load_checkpoint(a.checkpoint);
        GroundTruth truth(d);
        if (model.format == "single_target" && so.mode != PrefixMode::plain)
            throw ConfigError("single-target models only support plain generation", "prefix_mode");
        auto gopt = generation_for(model, cfg);
        auto recs = generate_records(model, d, truth, d.split(a.split), so, gopt);
        return std::make_tuple(std::move(model), std::move(d), std::move(recs));
    };
    auto positions_for = [](const lm::ListLm& model, const SequentialOptions& so) {
        if (model.format == "single_target") return std::vector<int>{1};
        return scored_positions(static_cast<int>(so.n), so.list_size);
    };

    auto* gen = app.add_subcommand("generate", "Generate lists with a trained list model");
    add_gen(gen, ga);
    gen->add_option("--out", ga.out, "Predictions file")->required();
    gen->callback([&] {
        action = [&] {
            ov.add("model.beam", ga.beam);
            auto cfg = ov.load(g);
            SequentialOptions so;
            auto [model, d, recs] = run_gen(ga, cfg, so);
            json extra = {{"mode", mode_tag(so.mode, so.n)},
                          {"positions", positions_for(model, so)},
                          {"split", ga.split},
                          {"prefix_seed", so.seed},
                          {"format", model.format}};
            write_predictions(ga.out, recs, cfg.provenance(model.seed), extra);
            note(g, {{"predictions", ga.out}, {"records", recs.size()}});
        };
    });

    auto* seq = app.add_subcommand("sequential-eval", "Generate with given prefixes and score the remaining positions");
    add_gen(seq, sa);
    seq->add_option("--out", sa.report_out, "Report JSON file");
    seq->add_option("--predictions-out", sa.out, "Also write the predictions");
    std::string seq_name;
    seq->add_option("--name", seq_name, "Row label in the table");
    seq->callback([&] {
        action = [&] {
            ov.add("model.beam", sa.beam);
            auto cfg = ov.load(g);
            SequentialOptions so;
            auto [model, d, recs] = run_gen(sa, cfg, so);
            GroundTruth truth(d);
            EvalOptions eo;
            eo.k = so.k;
            eo.list_size = so.list_size;
            eo.mode = mode_tag(so.mode, so.n);
            eo.positions = positions_for(model, so);
            eo.with_ndcg = so.mode == PrefixMode::plain && model.format != "single_target";
            eo.name = seq_name;
            auto rep = evaluate(recs, truth, eo);
            const auto prov = cfg.provenance(so.seed);
            if (!sa.out.empty())
                write_predictions(sa.out, recs, prov, {{"mode", eo.mode}, {"positions", eo.positions}, {"split", sa.split}});
            if (!sa.report_out.empty()) write_text_file(sa.report_out, report_file_json(rep, prov).dump(1) + "\n");
            if (!g.quiet) std::cout << render_table({rep});
        };
    });

    // evaluate ------------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "Score a predictions file against the dataset");
    std::string ev_pred, ev_dataset, ev_out, ev_name, ev_breakdown;
    std::optional<std::size_t> ev_k;
    std::vector<int> ev_positions;
    ev->add_option("--predictions", ev_pred)->required();
    ev->add_option("--dataset", ev_dataset)->required();
    ev->add_option("--out", ev_out, "Report JSON file");
    ev->add_option("--name", ev_name, "Row label in the table");
    ev->add_option("--k", ev_k);
    ev->add_option("--positions", ev_positions, "Positions to score (default: from the file header)");
    ev->add_option("--per-concept", ev_breakdown, "Per-concept breakdown JSON lines");
    ev->callback([&] {
        action = [&] {
            ov.add("eval.k", ev_k);
            auto cfg = ov.load(g);
            auto d = load_dataset(ev_dataset);
            GroundTruth truth(d);
            auto file = read_prediction_file(ev_pred, d.concepts, cfg.match());
            EvalOptions eo;
            eo.k = cfg.k();
            eo.list_size = d.target_size;
            eo.ndcg_m = static_cast<int>(d.target_size);
            eo.name = ev_name;
            if (!file.header.is_null()) {
                eo.mode = file.header.value("mode", "plain");
                if (file.header.contains("positions")) eo.positions = file.header.at("positions").get<std::vector<int>>();
            }
            if (!ev_positions.empty()) eo.positions = ev_positions;
            if (eo.positions.size() == 1 && eo.positions.front() == 1) eo.with_ndcg = false;
            auto rep = evaluate(file.records, truth, eo);
            Provenance prov = cfg.provenance(0);
            if (!file.header.is_null() && file.header.contains("provenance"))
                prov = Provenance::from_json(file.header.at("provenance"));
            if (!ev_out.empty()) write_text_file(ev_out, report_file_json(rep, prov).dump(1) + "\n");
            if (!ev_breakdown.empty()) {
                std::string s;
                for (const auto& j : per_concept_breakdown(file.records, truth, eo)) s += j.dump() + "\n";
                write_text_file(ev_breakdown, s);
            }
            if (!g.quiet) std::cout << render_table({rep});
        };
    });

    // report --------------------------------------------------------------
    auto* rp = app.add_subcommand("report", "Render report files as a table, or bucket a predictions file by frequency");
    std::vector<std::string> rp_reports;
    bool rp_buckets = false;
    std::string rp_pred, rp_dataset, rp_out;
    std::vector<std::uint64_t> rp_edges;
    rp->add_option("--reports", rp_reports, "Report JSON files, one table row each");
    rp->add_flag("--buckets", rp_buckets, "Frequency-bucketed report of --predictions");
    rp->add_option("--predictions", rp_pred);
    rp->add_option("--dataset", rp_dataset);
    rp->add_option("--edges", rp_edges, "Bucket edges (default: eval.buckets)");
    rp->add_option("--out", rp_out, "Write the rendered table (and bucket JSON alongside)");
    rp->callback([&] {
        action = [&] {
            if (!rp_edges.empty()) ov.add_json("eval.buckets", rp_edges);
            auto cfg = ov.load(g);
            std::string table;
            if (rp_buckets) {
                if (rp_pred.empty() || rp_dataset.empty())
                    throw ConfigError("--buckets needs --predictions and --dataset", "report");
                auto d = load_dataset(rp_dataset);
                GroundTruth truth(d);
                auto file = read_prediction_file(rp_pred, d.concepts, cfg.match());
                EvalOptions eo;
                eo.k = cfg.k();
                eo.list_size = d.target_size;
                if (!file.header.is_null() && file.header.contains("positions"))
                    eo.positions = file.header.at("positions").get<std::vector<int>>();
                auto buckets = frequency_bucket_report(file.records, truth, cfg.buckets(), eo);
                std::vector<MetricReport> rows;
                for (const auto& b : buckets) {
                    if (b.report) rows.push_back(*b.report);
                    else table += "# " + b.label() + ": no concepts\n";
                }
                table = render_table(rows) + table;
                if (!rp_out.empty()) {
                    auto all = evaluate(file.records, truth, eo);
                    write_text_file(rp_out + ".json", report_file_json(all, cfg.provenance(0), &buckets).dump(1) + "\n");
                }
            } else {
                if (rp_reports.empty()) throw ConfigError("give --reports files or --buckets", "report");
                std::vector<MetricReport> rows;
                for (const auto& p : rp_reports) rows.push_back(load_report(p));
                table = render_table(rows);
            }
            if (!rp_out.empty()) write_text_file(rp_out, table);
            if (!g.quiet) std::cout << table;
        };
    });

    // distill-explanations ------------------------------------------------
    auto* dx = app.add_subcommand("distill-explanations", "Query a teacher and build the explained corpus");
    std::string dx_dataset, dx_out, dx_cache, dx_split = "train";
    std::optional<std::string> dx_url;
    bool dx_mock = false;
    dx->add_option("--dataset", dx_dataset)->required();
    dx->add_option("--out", dx_out, "Explained corpus file")->required();
    dx->add_option("--cache", dx_cache, "Explanation cache (JSON lines)")->required();
    dx->add_option("--split", dx_split)->check(CLI::IsMember({"train", "dev", "test"}));
    auto* url_opt = dx->add_option("--teacher-url", dx_url, "Completion endpoint base URL");
    dx->add_flag("--mock", dx_mock, "Deterministic template teacher")->excludes(url_opt);
    dx->callback([&] {
        action = [&] {
            ov.add("teacher.url", dx_url);
            auto cfg = ov.load(g);
            auto d = load_dataset(dx_dataset);
            ExplanationCache cache(dx_cache);
            std::unique_ptr<Teacher> teacher;
            auto ep = cfg.teacher();
            if (dx_mock) teacher = std::make_unique<MockTeacher>();
            else teacher = std::make_unique<HttpTeacher>(ep);
            DistillStats stats;
            auto lines = build_explained_corpus(d, d.split(dx_split), *teacher, cache, ep.max_in_flight, cfg.grammar(), &stats);
            write_corpus(dx_out, lines);
            note(g, {{"corpus", dx_out}, {"lines", lines.size()}, {"teacher", teacher->id()},
                     {"teacher_calls", stats.teacher_calls.load()}, {"cache_hits", stats.cache_hits.load()}});
        };
    });

    // ingest-external -----------------------------------------------------
    auto* ing = app.add_subcommand("ingest-external", "Convert external generations into interchange predictions");
    std::string ing_in, ing_dataset, ing_out;
    std::optional<std::string> ing_concepts, ing_vectors;
    bool ing_map = false, ing_exp = false;
    ing->add_option("--input", ing_in, "Raw generations or interchange records (JSON lines)")->required();
    ing->add_option("--dataset", ing_dataset, "Dataset whose concept set is the universe");
    ing->add_option("--concepts", ing_concepts, "Concept-set file (instead of --dataset)");
    ing->add_option("--vectors", ing_vectors, "Word vectors for --map-to-set");
    ing->add_option("--out", ing_out)->required();
    ing->add_flag("--map-to-set", ing_map, "Map invalid slots to the nearest in-set concept");
    ing->add_flag("--explanations", ing_exp, "Generations carry 'y: explanation' slots");
    ing->callback([&] {
        action = [&] {
            ov.add("paths.concepts", ing_concepts);
            ov.add("paths.vectors", ing_vectors);
            auto cfg = ov.load(g);
            ConceptSet set;
            if (!ing_dataset.empty()) set = load_dataset(ing_dataset).concepts;
            else set = load_concept_set(require_path(cfg, "concepts"));
            std::optional<WordVectorTable> vectors;
            if (ing_map) vectors = load_word_vectors(require_path(cfg, "vectors"), cfg.at("embed")["lowercase"].get<bool>());
            IngestOptions io;
            io.map_to_set = ing_map;
            io.expect_explanations = ing_exp;
            io.match = cfg.match();
            io.grammar = cfg.grammar();
            auto recs = external_llm_ingest(ing_in, set, vectors ? &*vectors : nullptr, io);
            write_predictions(ing_out, recs, cfg.provenance(0), {{"mode", "plain"}, {"source", "external"}});
            note(g, {{"predictions", ing_out}, {"records", recs.size()}});
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_diag("config", e.what());
        return 2;
    }
    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        emit_diag(kind_name(e.kind()), e.what(), e.field());
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        emit_diag("data", e.what());
        return 3;
    } catch (const std::exception& e) {
        emit_diag("runtime", e.what());
        return 4;
    }
}

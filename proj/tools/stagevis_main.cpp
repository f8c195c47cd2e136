// Command-line front end: extract HTML, ingest/index corpora, run single
// queries, execute evaluation campaigns, and render reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stagevis/http_backends.hpp"
#include "stagevis/stagevis.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct RunSettings {
    std::string corpus;
    std::string queries;
    std::string out;
    int chunk_size = 256;
    int chunk_overlap = 64;
    int k_retrieve = 100;
    int k_rerank = 10;
    int metric_k_retrieval = 20;
    double rrf_kappa = 60.0;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    bool include_jsonld = false;
    bool gen_delta_all = false;  // default: co-cited pairs only
    std::vector<std::string> strategies{"identity"};
    std::vector<std::string> scopes{"both"};
    std::string reranker = "builtin";
    std::string generator = "mock";
    std::string optimizer = "identity";
    std::string autogeo_rules_path;
    uint64_t seed = 1;
    int parallelism = 1;
};

void add_pipeline_flags(CLI::App* cmd, RunSettings& s) {
    cmd->add_option("--chunk-size", s.chunk_size, "Tokens per passage");
    cmd->add_option("--chunk-overlap", s.chunk_overlap, "Token overlap between passages");
    cmd->add_option("--k-retrieve", s.k_retrieve, "Retrieval candidate pool size");
    cmd->add_option("--k-rerank", s.k_rerank, "Passages kept after reranking");
    cmd->add_option("--metric-k-retrieval", s.metric_k_retrieval, "Hit-rate cutoff at retrieval");
    cmd->add_option("--rrf-kappa", s.rrf_kappa, "Rank-fusion constant");
    cmd->add_option("--bm25-k1", s.bm25_k1, "BM25 k1");
    cmd->add_option("--bm25-b", s.bm25_b, "BM25 b");
    cmd->add_flag("--include-jsonld", s.include_jsonld,
                  "Include structured-data text in the generation context");
    cmd->add_option("--reranker", s.reranker, "builtin, or an http(s) scoring endpoint");
    cmd->add_option("--generator", s.generator, "mock, or an http(s) generation endpoint");
}

bool is_url(const std::string& value) {
    return value.rfind("http://", 0) == 0 || value.rfind("https://", 0) == 0;
}

stagevis::PipelineConfig pipeline_config(const RunSettings& s) {
    stagevis::PipelineConfig config;
    config.k_retrieve = s.k_retrieve;
    config.k_rerank = s.k_rerank;
    config.metric_k_retrieval = s.metric_k_retrieval;
    config.include_jsonld = s.include_jsonld;
    return config;
}

stagevis::FieldIndexSet::Options index_options(const RunSettings& s) {
    stagevis::FieldIndexSet::Options options;
    options.bm25.k1 = s.bm25_k1;
    options.bm25.b = s.bm25_b;
    options.rrf_kappa = s.rrf_kappa;
    return options;
}

struct Backends {
    std::unique_ptr<stagevis::PassageScorer> scorer;
    std::unique_ptr<stagevis::GeneratorBackend> generator;
    std::unique_ptr<stagevis::DocumentRewriter> rewriter;
    stagevis::PipelineBindings bindings;
};

Backends make_backends(const RunSettings& s) {
    Backends b;
    if (s.reranker == "builtin") {
        b.scorer = std::make_unique<stagevis::OverlapScorer>();
    } else if (is_url(s.reranker)) {
        stagevis::HttpBackendConfig config;
        config.endpoint = s.reranker;
        b.scorer = std::make_unique<stagevis::HttpScorer>(config);
    } else {
        throw stagevis::Error("--reranker must be 'builtin' or an http(s) URL");
    }
    if (s.generator == "mock") {
        b.generator = std::make_unique<stagevis::MockGenerator>();
    } else if (is_url(s.generator)) {
        stagevis::HttpBackendConfig config;
        config.endpoint = s.generator;
        b.generator = std::make_unique<stagevis::HttpGenerator>(config);
    } else {
        throw stagevis::Error("--generator must be 'mock' or an http(s) URL");
    }
    if (s.optimizer == "identity") {
        b.rewriter = std::make_unique<stagevis::IdentityRewriter>();
    } else if (is_url(s.optimizer)) {
        stagevis::HttpBackendConfig config;
        config.endpoint = s.optimizer;
        b.rewriter = std::make_unique<stagevis::HttpRewriter>(config);
    } else {
        throw stagevis::Error("--optimizer must be 'identity' or an http(s) URL");
    }
    b.bindings.scorer = b.scorer.get();
    b.bindings.generator = b.generator.get();
    return b;
}

stagevis::CorpusSnapshot load_corpus(const RunSettings& s) {
    stagevis::ChunkConfig chunk{s.chunk_size, s.chunk_overlap};
    auto docs = stagevis::CorpusSnapshot::read_corpus_file(s.corpus);
    return stagevis::CorpusSnapshot::ingest(std::move(docs), chunk);
}

int cmd_extract(const std::string& html_dir, const std::string& out) {
    std::vector<fs::path> pages;
    for (const auto& entry : fs::recursive_directory_iterator(html_dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".html" || ext == ".htm") pages.push_back(entry.path());
    }
    std::sort(pages.begin(), pages.end());
    std::vector<stagevis::DocumentContent> docs;
    for (const auto& page : pages) {
        std::ifstream in(page, std::ios::binary);
        std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        fs::path rel = fs::relative(page, html_dir);
        fs::path id_path = rel;
        id_path.replace_extension();
        stagevis::DocumentContent doc =
            stagevis::parse_html(raw, id_path.generic_string());
        doc.url = rel.generic_string();
        docs.push_back(std::move(doc));
    }
    stagevis::CorpusSnapshot::write_corpus_file(out, docs);
    std::cout << "extracted " << docs.size() << " documents -> " << out << "\n";
    return 0;
}

int cmd_ingest(const RunSettings& s) {
    stagevis::CorpusSnapshot snapshot = load_corpus(s);
    snapshot.save(s.out);
    std::cout << "snapshot " << snapshot.snapshot_id() << ": " << snapshot.document_count()
              << " documents, " << snapshot.passages().size() << " passages -> " << s.out << "\n";
    return 0;
}

int cmd_index(const RunSettings& s, const std::string& snapshot_dir) {
    stagevis::CorpusSnapshot snapshot = stagevis::CorpusSnapshot::load(snapshot_dir);
    stagevis::FieldIndexSet index = stagevis::FieldIndexSet::build(snapshot, index_options(s));
    index.save(s.out);
    std::cout << "indexed snapshot " << snapshot.snapshot_id() << " (" << index.unit_count()
              << " units) -> " << s.out << "\n";
    return 0;
}

ordered_json ranked_to_json(const stagevis::RankedList& list) {
    ordered_json entries = ordered_json::array();
    for (const auto& e : list.entries) {
        entries.push_back({{"passage_id", e.passage_id}, {"doc_id", e.doc_id}, {"score", e.score}});
    }
    return ordered_json{{"stage", list.stage}, {"entries", std::move(entries)}};
}

int cmd_run(const RunSettings& s, const std::string& query_id, const std::string& query_text) {
    stagevis::CorpusSnapshot snapshot = load_corpus(s);
    stagevis::FieldIndexSet index = stagevis::FieldIndexSet::build(snapshot, index_options(s));
    Backends backends = make_backends(s);
    stagevis::StageTrace trace = stagevis::run_pipeline(query_id, query_text, snapshot, index,
                                                        backends.bindings, pipeline_config(s));
    ordered_json citations = ordered_json::array();
    for (const auto& c : trace.response.citations) {
        citations.push_back(
            {{"order", c.order}, {"context_index", c.context_index}, {"doc_id", c.doc_id}});
    }
    ordered_json provenance = ordered_json::array();
    for (const auto& entry :
         stagevis::citation_provenance(trace.response, trace.context, snapshot)) {
        provenance.push_back({{"order", entry.citation.order},
                              {"doc_id", entry.citation.doc_id},
                              {"region", entry.region},
                              {"similarity", entry.similarity}});
    }
    ordered_json out{{"query_id", query_id},
                     {"query", query_text},
                     {"snapshot_id", snapshot.snapshot_id()},
                     {"retrieval", ranked_to_json(trace.retrieval)},
                     {"reranked", ranked_to_json(trace.reranked)},
                     {"response",
                      {{"text", trace.response.text},
                       {"citations", std::move(citations)},
                       {"malformed_markers", trace.response.malformed_markers},
                       {"duplicate_markers", trace.response.duplicate_markers}}},
                     {"provenance", std::move(provenance)}};
    const std::string dump = out.dump(2) + "\n";
    if (s.out.empty()) {
        std::cout << dump;
    } else {
        stagevis::write_file_atomic(s.out, dump);
        std::cout << "trace -> " << s.out << "\n";
    }
    return 0;
}

ordered_json settings_to_manifest(const RunSettings& s) {
    return ordered_json{{"format", "stagevis-run/1"},
                        {"corpus", s.corpus},
                        {"queries", s.queries},
                        {"chunk_size", s.chunk_size},
                        {"chunk_overlap", s.chunk_overlap},
                        {"k_retrieve", s.k_retrieve},
                        {"k_rerank", s.k_rerank},
                        {"metric_k_retrieval", s.metric_k_retrieval},
                        {"rrf_kappa", s.rrf_kappa},
                        {"bm25_k1", s.bm25_k1},
                        {"bm25_b", s.bm25_b},
                        {"include_jsonld", s.include_jsonld},
                        {"gen_delta_all", s.gen_delta_all},
                        {"strategies", s.strategies},
                        {"scopes", s.scopes},
                        {"reranker", s.reranker},
                        {"generator", s.generator},
                        {"optimizer", s.optimizer},
                        {"autogeo_rules", s.autogeo_rules_path},
                        {"seed", s.seed},
                        {"parallelism", s.parallelism}};
}

void settings_from_manifest(const ordered_json& manifest, RunSettings& s) {
    if (manifest.value("format", std::string{}) != "stagevis-run/1") {
        throw stagevis::Error("unrecognized run manifest format");
    }
    s.corpus = manifest.value("corpus", s.corpus);
    s.queries = manifest.value("queries", s.queries);
    s.chunk_size = manifest.value("chunk_size", s.chunk_size);
    s.chunk_overlap = manifest.value("chunk_overlap", s.chunk_overlap);
    s.k_retrieve = manifest.value("k_retrieve", s.k_retrieve);
    s.k_rerank = manifest.value("k_rerank", s.k_rerank);
    s.metric_k_retrieval = manifest.value("metric_k_retrieval", s.metric_k_retrieval);
    s.rrf_kappa = manifest.value("rrf_kappa", s.rrf_kappa);
    s.bm25_k1 = manifest.value("bm25_k1", s.bm25_k1);
    s.bm25_b = manifest.value("bm25_b", s.bm25_b);
    s.include_jsonld = manifest.value("include_jsonld", s.include_jsonld);
    s.gen_delta_all = manifest.value("gen_delta_all", s.gen_delta_all);
    if (manifest.contains("strategies")) {
        s.strategies = manifest.at("strategies").get<std::vector<std::string>>();
    }
    if (manifest.contains("scopes")) {
        s.scopes = manifest.at("scopes").get<std::vector<std::string>>();
    }
    s.reranker = manifest.value("reranker", s.reranker);
    s.generator = manifest.value("generator", s.generator);
    s.optimizer = manifest.value("optimizer", s.optimizer);
    s.autogeo_rules_path = manifest.value("autogeo_rules", s.autogeo_rules_path);
    s.seed = manifest.value("seed", s.seed);
    s.parallelism = manifest.value("parallelism", s.parallelism);
}

int cmd_evaluate(RunSettings& s, const std::string& config_path) {
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw stagevis::Error("cannot open config " + config_path);
        settings_from_manifest(ordered_json::parse(in), s);
    }
    if (s.corpus.empty() || s.queries.empty() || s.out.empty()) {
        throw stagevis::Error("evaluate needs --corpus, --queries and --out (or a --config)");
    }

    stagevis::CorpusSnapshot snapshot = load_corpus(s);
    stagevis::FieldIndexSet index = stagevis::FieldIndexSet::build(snapshot, index_options(s));
    Backends backends = make_backends(s);
    stagevis::StrategyRegistry registry = stagevis::StrategyRegistry::with_defaults();
    if (!s.autogeo_rules_path.empty()) {
        std::ifstream rules_in(s.autogeo_rules_path);
        if (!rules_in) throw stagevis::Error("cannot open autogeo rules " + s.autogeo_rules_path);
        std::string rules((std::istreambuf_iterator<char>(rules_in)),
                          std::istreambuf_iterator<char>());
        registry.set_autogeo_rules(rules);
    }

    stagevis::CampaignConfig config;
    config.pipeline = pipeline_config(s);
    config.index_options = index_options(s);
    config.strategies = s.strategies;
    config.scopes.clear();
    for (const auto& scope : s.scopes) config.scopes.push_back(stagevis::scope_from_name(scope));
    config.run_seed = s.seed;
    config.parallelism = s.parallelism;
    config.reranker_label = s.reranker;
    config.generator_label = s.generator;
    config.optimizer_label = s.optimizer;

    auto queries = stagevis::read_query_file(s.queries);
    stagevis::CampaignResult campaign = stagevis::run_campaign(
        queries, snapshot, index, registry, *backends.rewriter, backends.bindings, config);

    fs::create_directories(s.out);
    stagevis::write_results_file(fs::path(s.out) / "results.jsonl", campaign);

    ordered_json manifest = settings_to_manifest(s);
    manifest["snapshot_id"] = campaign.snapshot_id;
    manifest["query_count"] = queries.size();
    manifest["instance_count"] = campaign.results.size();
    manifest["skipped_queries"] = campaign.skipped_queries;
    manifest["failed_instances"] = campaign.failed_instances;
    manifest["scope_violations"] = campaign.scope_violations;
    stagevis::write_file_atomic(fs::path(s.out) / "manifest.json", manifest.dump(2) + "\n");

    std::vector<stagevis::VisibilityRecord> records;
    for (const auto& result : campaign.results) {
        if (result.failed) continue;
        records.push_back(result.baseline);
        records.push_back(result.optimized);
    }
    stagevis::ReportOptions report_options;
    report_options.metric_k_retrieval = s.metric_k_retrieval;
    report_options.k_rerank = s.k_rerank;
    report_options.gen_delta_co_cited_only = !s.gen_delta_all;
    stagevis::write_report_files(fs::path(s.out) / "reports", records, report_options);

    std::cout << "campaign: " << campaign.results.size() << " instances over " << queries.size()
              << " queries (" << campaign.skipped_queries.size() << " skipped, "
              << campaign.failed_instances << " failed) -> " << s.out << "\n";
    return 0;
}

int cmd_report(const RunSettings& s, const std::string& results_path,
               const std::string& group_by) {
    stagevis::LoadedRecords loaded = stagevis::read_results_file(results_path);
    stagevis::ReportOptions options;
    options.metric_k_retrieval = s.metric_k_retrieval;
    options.k_rerank = s.k_rerank;
    options.gen_delta_co_cited_only = !s.gen_delta_all;
    if (!group_by.empty()) {
        for (const auto& table : stagevis::build_report(loaded.usable, group_by, options)) {
            std::cout << "# " << table.name << "\n" << table.to_tsv();
        }
        return 0;
    }
    if (s.out.empty()) {
        std::cout << stagevis::summary_text(loaded.usable, options);
        return 0;
    }
    stagevis::write_report_files(s.out, loaded.usable, options);
    std::cout << "reports (" << loaded.usable.size() << " records, " << loaded.failed_instances
              << " failed instances excluded) -> " << s.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stage-level visibility evaluation for retrieve-rerank-generate pipelines"};
    app.require_subcommand(1);

    RunSettings s;

    auto* extract = app.add_subcommand("extract", "Extract structured documents from HTML files");
    std::string html_dir;
    extract->add_option("--html-dir", html_dir, "Directory of .html files")->required();
    extract->add_option("--out", s.out, "Output corpus file (JSONL)")->required();

    auto* ingest = app.add_subcommand("ingest", "Chunk a corpus file into a snapshot directory");
    ingest->add_option("--corpus", s.corpus, "Corpus JSONL")->required();
    ingest->add_option("--out", s.out, "Snapshot output directory")->required();
    ingest->add_option("--chunk-size", s.chunk_size, "Tokens per passage");
    ingest->add_option("--chunk-overlap", s.chunk_overlap, "Token overlap between passages");

    auto* index_cmd = app.add_subcommand("index", "Build field indexes for a snapshot");
    std::string snapshot_dir;
    index_cmd->add_option("--snapshot", snapshot_dir, "Snapshot directory")->required();
    index_cmd->add_option("--out", s.out, "Index output file")->required();
    index_cmd->add_option("--bm25-k1", s.bm25_k1, "BM25 k1");
    index_cmd->add_option("--bm25-b", s.bm25_b, "BM25 b");
    index_cmd->add_option("--rrf-kappa", s.rrf_kappa, "Rank-fusion constant");

    auto* run = app.add_subcommand("run", "Run one query through the pipeline and dump the trace");
    std::string query_text, query_id = "q";
    run->add_option("--corpus", s.corpus, "Corpus JSONL")->required();
    run->add_option("--query", query_text, "Query text")->required();
    run->add_option("--query-id", query_id, "Query identifier for the trace");
    run->add_option("--out", s.out, "Trace output file (stdout when omitted)");
    add_pipeline_flags(run, s);

    auto* evaluate = app.add_subcommand("evaluate", "Run a baseline/optimized visibility campaign");
    std::string config_path;
    evaluate->add_option("--config", config_path, "Re-run from a stored run manifest");
    evaluate->add_option("--corpus", s.corpus, "Corpus JSONL");
    evaluate->add_option("--queries", s.queries, "Query JSONL");
    evaluate->add_option("--out", s.out, "Run output directory");
    evaluate->add_option("--seed", s.seed, "Campaign seed");
    evaluate->add_option("--strategy", s.strategies, "Strategy name (repeatable)");
    evaluate
        ->add_option("--scope", s.scopes, "Optimization scope: body, structural, both (repeatable)")
        ->check(CLI::IsMember({"body", "structural", "both"}));
    evaluate->add_option("--optimizer", s.optimizer, "identity, or an http(s) rewriting endpoint");
    evaluate->add_option("--autogeo-rules", s.autogeo_rules_path,
                         "File of preference rules enabling the autogeo strategy");
    evaluate->add_option("--parallelism", s.parallelism, "Concurrent instances");
    evaluate->add_flag("--gen-delta-all", s.gen_delta_all,
                       "Average generation rank change over all pairs, not just co-cited ones");
    add_pipeline_flags(evaluate, s);

    auto* report = app.add_subcommand("report", "Render tables from a results file");
    std::string results_path, group_by;
    report->add_option("--results", results_path, "results.jsonl from evaluate")->required();
    report->add_option("--out", s.out, "Report output directory (stdout summary when omitted)");
    report->add_option("--group-by", group_by,
                       "Print one grouping to stdout: strategy, scope, domain, backend");
    report->add_option("--metric-k-retrieval", s.metric_k_retrieval, "Hit-rate cutoff at retrieval");
    report->add_option("--k-rerank", s.k_rerank, "Hit-rate cutoff at reranking");
    report->add_flag("--gen-delta-all", s.gen_delta_all,
                     "Average generation rank change over all pairs, not just co-cited ones");

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) return cmd_extract(html_dir, s.out);
        if (ingest->parsed()) return cmd_ingest(s);
        if (index_cmd->parsed()) return cmd_index(s, snapshot_dir);
        if (run->parsed()) return cmd_run(s, query_id, query_text);
        if (evaluate->parsed()) return cmd_evaluate(s, config_path);
        if (report->parsed()) return cmd_report(s, results_path, group_by);
    } catch (const stagevis::Error& e) {
        std::cerr << "error" << (e.stage().empty() ? "" : "[" + e.stage() + "]") << ": "
                  << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stagevis/corpus.hpp"
#include "stagevis/error.hpp"
#include "stagevis/generate.hpp"
#include "stagevis/index.hpp"
#include "stagevis/optimize.hpp"
#include "stagevis/rerank.hpp"
#include "stagevis/text.hpp"

namespace stagevis {

enum class Stage { Retrieval, Reranking, Generation };

inline const char* stage_label(Stage stage) {
    switch (stage) {
        case Stage::Retrieval: return "retrieval";
        case Stage::Reranking: return "reranking";
        case Stage::Generation: return "generation";
    }
    return "unknown";
}

struct PipelineConfig {
    int k_retrieve = 100;
    int k_rerank = 10;
    int metric_k_retrieval = 20;  // metric cutoff, distinct from the candidate pool size
    bool include_jsonld = false;
    int max_batch = 32;

    int retrieval_miss_rank() const { return k_retrieve + 1; }
    int reranking_miss_rank() const { return k_rerank + 1; }
};

struct PipelineBindings {
    PassageScorer* scorer = nullptr;
    GeneratorBackend* generator = nullptr;
};

struct StageTrace {
    std::string query_id;
    RankedList retrieval;   // top k_retrieve
    RankedList reranked;    // top k_rerank
    GenerationContext context;
    GeneratedResponse response;
};

// One full pass: fused retrieval, independent passage scoring, cited answer.
inline StageTrace run_pipeline(const std::string& query_id, const std::string& query,
                               const CorpusSnapshot& snapshot, const FieldIndexSet& index,
                               const PipelineBindings& bindings, const PipelineConfig& config = {}) {
    if (!bindings.scorer || !bindings.generator) {
        throw Error("pipeline bindings incomplete", "pipeline");
    }
    StageTrace trace;
    trace.query_id = query_id;
    trace.retrieval.stage = "retrieval";
    trace.retrieval.entries = index.retrieve(query, static_cast<size_t>(config.k_retrieve));

    std::vector<RerankCandidate> candidates;
    candidates.reserve(trace.retrieval.entries.size());
    for (const auto& entry : trace.retrieval.entries) {
        candidates.push_back({entry.passage_id, entry.doc_id, snapshot.passage(entry.passage_id).text});
    }
    trace.reranked.stage = "reranking";
    trace.reranked.entries =
        rerank_candidates(*bindings.scorer, query, std::move(candidates),
                          static_cast<size_t>(config.k_rerank), config.max_batch);

    trace.context = assemble_context(query, trace.reranked.entries, snapshot,
                                     static_cast<size_t>(config.k_rerank), config.include_jsonld);
    if (!trace.context.candidates.empty()) {
        trace.response = generate_response(*bindings.generator, trace.context);
    }
    return trace;
}

// Uniform seeded draw over the distinct documents of the reranked top-k,
// taken in first-appearance order. Empty list → no target (instance skipped).
inline std::optional<std::string> select_target(const StageTrace& trace, uint64_t seed) {
    std::vector<std::string> docs;
    std::set<std::string> seen;
    for (const auto& entry : trace.reranked.entries) {
        if (seen.insert(entry.doc_id).second) docs.push_back(entry.doc_id);
    }
    if (docs.empty()) return std::nullopt;
    SplitMix64 rng(seed);
    return docs[rng.below(docs.size())];
}

inline uint64_t instance_seed(uint64_t run_seed, const std::string& query_id) {
    return fnv1a64(query_id, run_seed ^ 0x9e3779b97f4a7c15ULL);
}

// A document's rank in a passage ranking: the best (minimum) 1-based position
// among its passages, or miss_rank when absent.
inline int doc_rank(const RankedList& ranked, const std::string& doc_id, int miss_rank) {
    for (size_t i = 0; i < ranked.entries.size(); ++i) {
        if (ranked.entries[i].doc_id == doc_id) return static_cast<int>(i + 1);
    }
    return miss_rank;
}

// Generation-stage rank: the citation order at which the document first
// appears in the response, absent when never cited.
inline std::optional<int> generation_rank(const GeneratedResponse& response,
                                          const std::string& doc_id) {
    for (const auto& citation : response.citations) {
        if (citation.doc_id == doc_id) return citation.order;
    }
    return std::nullopt;
}

struct EvalInstance {
    std::string query_id;
    std::string query;
    std::string domain;
    std::string target_doc_id;
    uint64_t seed = 0;
};

// One side (baseline or optimized) of one instance: the target's visibility
// at each stage plus the tags aggregation groups by.
struct VisibilityRecord {
    std::string query_id;
    std::string domain;
    std::string target_doc_id;
    std::string side;      // "baseline" | "optimized"
    std::string strategy;
    std::string scope;
    std::string backend;   // optimizer backend label
    std::string snapshot_id;
    int retrieval_rank = 0;   // miss → k_retrieve + 1
    int reranking_rank = 0;   // miss → k_rerank + 1
    bool cited = false;
    int generation_rank = 0;  // valid iff cited
    bool scope_violation = false;

    int stage_rank(Stage stage) const {
        switch (stage) {
            case Stage::Retrieval: return retrieval_rank;
            case Stage::Reranking: return reranking_rank;
            case Stage::Generation: return generation_rank;
        }
        return 0;
    }
};

inline VisibilityRecord record_from_trace(const StageTrace& trace, const EvalInstance& instance,
                                          const std::string& side,
                                          const PipelineConfig& config,
                                          const std::string& snapshot_id) {
    VisibilityRecord record;
    record.query_id = instance.query_id;
    record.domain = instance.domain;
    record.target_doc_id = instance.target_doc_id;
    record.side = side;
    record.snapshot_id = snapshot_id;
    record.retrieval_rank = doc_rank(trace.retrieval, instance.target_doc_id,
                                     config.retrieval_miss_rank());
    record.reranking_rank = doc_rank(trace.reranked, instance.target_doc_id,
                                     config.reranking_miss_rank());
    std::optional<int> gen = generation_rank(trace.response, instance.target_doc_id);
    record.cited = gen.has_value();
    record.generation_rank = gen.value_or(0);
    return record;
}

struct InstanceResult {
    EvalInstance instance;
    VisibilityRecord baseline;
    VisibilityRecord optimized;
    bool failed = false;
    std::string failure_stage;
    StageTrace baseline_trace;   // kept for provenance/reporting
    StageTrace optimized_trace;
};

// Baseline → optimize target → replace + reindex → re-run the same query.
// The optimized run works on its own snapshot; the caller's state is untouched.
inline InstanceResult evaluate_instance(const EvalInstance& instance,
                                        const CorpusSnapshot& snapshot,
                                        const FieldIndexSet& index,
                                        const StageTrace& baseline_trace,
                                        const StrategySpec& strategy, OptimizationScope scope,
                                        DocumentRewriter& rewriter,
                                        const PipelineBindings& bindings,
                                        const PipelineConfig& config,
                                        const std::string& backend_label) {
    InstanceResult result;
    result.instance = instance;
    result.baseline_trace = baseline_trace;
    result.baseline = record_from_trace(baseline_trace, instance, "baseline", config,
                                        snapshot.snapshot_id());
    result.baseline.strategy = strategy.name;
    result.baseline.scope = scope_name(scope);
    result.baseline.backend = backend_label;

    try {
        ApplyResult applied =
            apply_strategy(snapshot.document(instance.target_doc_id), strategy, scope, rewriter);
        CorpusSnapshot optimized_snapshot =
            snapshot.replace_document(instance.target_doc_id, std::move(applied.document));
        FieldIndexSet optimized_index = FieldIndexSet::build(optimized_snapshot, index.options());
        result.optimized_trace = run_pipeline(instance.query_id, instance.query,
                                              optimized_snapshot, optimized_index, bindings,
                                              config);
        result.optimized = record_from_trace(result.optimized_trace, instance, "optimized", config,
                                             optimized_snapshot.snapshot_id());
        result.optimized.scope_violation = applied.scope_violation;
    } catch (const Error& e) {
        result.failed = true;
        result.failure_stage = e.stage().empty() ? "optimization" : e.stage();
        result.optimized = result.baseline;
        result.optimized.side = "optimized";
    } catch (const std::exception&) {
        result.failed = true;
        result.failure_stage = "optimization";
        result.optimized = result.baseline;
        result.optimized.side = "optimized";
    }
    result.optimized.strategy = strategy.name;
    result.optimized.scope = scope_name(scope);
    result.optimized.backend = backend_label;
    return result;
}

struct StageMetrics {
    int n = 0;                  // records contributing to hit/citation rates
    double hit_rate = 0.0;      // rank ≤ k (generation: cited)
    double citation_rate = 0.0;
    int delta_n = 0;            // pairs contributing to delta_rank
    double delta_rank = 0.0;    // mean(base − optimized); positive = improvement
    bool has_delta = false;
};

// Aggregates one strategy × scope cell. Records may mix sides: rates average
// over the given records; delta pairs baseline/optimized records by query_id.
// At generation, rank is citation order and — by default — delta averages
// only pairs cited on both sides.
inline StageMetrics compute_metrics(const std::vector<VisibilityRecord>& records, Stage stage,
                                    int k, bool gen_delta_co_cited_only = true) {
    StageMetrics metrics;
    std::map<std::string, const VisibilityRecord*> base_by_query;
    std::map<std::string, const VisibilityRecord*> opt_by_query;
    double hits = 0.0, cited = 0.0;
    for (const auto& record : records) {
        ++metrics.n;
        if (stage == Stage::Generation) {
            if (record.cited) hits += 1.0;
        } else if (record.stage_rank(stage) <= k) {
            hits += 1.0;
        }
        if (record.cited) cited += 1.0;
        if (record.side == "baseline") base_by_query[record.query_id] = &record;
        if (record.side == "optimized") opt_by_query[record.query_id] = &record;
    }
    if (metrics.n > 0) {
        metrics.hit_rate = hits / metrics.n;
        metrics.citation_rate = cited / metrics.n;
    }
    double delta_sum = 0.0;
    for (const auto& [query_id, base] : base_by_query) {
        auto it = opt_by_query.find(query_id);
        if (it == opt_by_query.end()) continue;
        const VisibilityRecord* opt = it->second;
        if (stage == Stage::Generation) {
            if (gen_delta_co_cited_only && !(base->cited && opt->cited)) continue;
            if (!gen_delta_co_cited_only && !(base->cited || opt->cited)) continue;
            const int miss = k + 1;
            const int b = base->cited ? base->generation_rank : miss;
            const int o = opt->cited ? opt->generation_rank : miss;
            delta_sum += b - o;
        } else {
            delta_sum += base->stage_rank(stage) - opt->stage_rank(stage);
        }
        ++metrics.delta_n;
    }
    if (metrics.delta_n > 0) {
        metrics.delta_rank = delta_sum / metrics.delta_n;
        metrics.has_delta = true;
    }
    return metrics;
}

// ---- citation provenance ----------------------------------------------------

inline constexpr const char* kRegionNames[5] = {"title", "meta_description", "headings", "jsonld",
                                                "body"};

namespace eval_detail {

inline size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<size_t> row(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) row[i] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
        size_t diag = row[0];
        row[0] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            size_t up = row[i];
            row[i] = std::min({row[i - 1] + 1, up + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[a.size()];
}

inline double similarity(std::string_view a, std::string_view b) {
    const size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

// Best similarity of the quote against any window of its own length in the
// region text. Verbatim containment short-circuits at 1.0.
inline double best_window_similarity(const std::string& quote, const std::string& region) {
    if (quote.empty() || region.empty()) return 0.0;
    if (region.find(quote) != std::string::npos) return 1.0;
    if (region.size() <= quote.size()) return similarity(quote, region);
    double best = 0.0;
    for (size_t start = 0; start + quote.size() <= region.size(); ++start) {
        best = std::max(best, similarity(quote, std::string_view(region).substr(start, quote.size())));
        if (best == 1.0) break;
    }
    return best;
}

}  // namespace eval_detail

struct QuoteLocation {
    std::string region;  // one of kRegionNames, or "unmatched"
    double similarity = 0.0;
};

// Attributes a quote to the document region it most plausibly came from.
// Regions are compared on normalized text; ties go to the more specific
// region (title first, body last), since heading and title text usually
// reappears inside the body.
inline QuoteLocation locate_quote(const std::string& quote, const DocumentContent& doc,
                                  double threshold = 0.8) {
    const std::string normalized = normalize_text(quote);
    const std::string regions[5] = {doc.structural.title, doc.structural.meta_description,
                                    serialize_headings(doc.structural.headings),
                                    doc.structural.jsonld_text, doc.body};
    QuoteLocation best{"unmatched", 0.0};
    if (normalized.empty()) return best;
    for (int r = 0; r < 5; ++r) {
        double sim = eval_detail::best_window_similarity(normalized, regions[r]);
        if (sim > best.similarity) {
            best.similarity = sim;
            best.region = kRegionNames[r];
        }
    }
    if (best.similarity < threshold) best.region = "unmatched";
    return best;
}

struct ProvenanceEntry {
    Citation citation;
    std::string region;
    double similarity = 0.0;
};

// Per-citation provenance over the cited documents' regions, using the quote
// the backend supplied for each context slot.
inline std::vector<ProvenanceEntry> citation_provenance(const GeneratedResponse& response,
                                                        const GenerationContext& context,
                                                        const CorpusSnapshot& snapshot,
                                                        double threshold = 0.8) {
    std::vector<ProvenanceEntry> entries;
    for (const auto& citation : response.citations) {
        if (citation.context_index < 1 ||
            citation.context_index > static_cast<int>(context.candidates.size())) {
            throw Error("citation slot outside context: " + std::to_string(citation.context_index));
        }
        ProvenanceEntry entry;
        entry.citation = citation;
        auto quote = response.quotes.find(citation.context_index);
        if (quote == response.quotes.end() || quote->second.empty()) {
            entry.region = "unmatched";
        } else {
            QuoteLocation location =
                locate_quote(quote->second, snapshot.document(citation.doc_id), threshold);
            entry.region = location.region;
            entry.similarity = location.similarity;
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace stagevis

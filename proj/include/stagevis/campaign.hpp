#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stagevis/corpus.hpp"
#include "stagevis/error.hpp"
#include "stagevis/eval.hpp"
#include "stagevis/index.hpp"
#include "stagevis/optimize.hpp"

namespace stagevis {

struct QueryRecord {
    std::string query_id;
    std::string text;
    std::string domain;
};

inline std::vector<QueryRecord> read_query_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open query file " + path.string());
    std::vector<QueryRecord> queries;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto record = nlohmann::ordered_json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("query_id") || !record.contains("text")) {
            throw Error("malformed query record at line " + std::to_string(line_no) + " of " +
                        path.string());
        }
        QueryRecord q;
        q.query_id = record.at("query_id").get<std::string>();
        q.text = record.at("text").get<std::string>();
        q.domain = record.value("domain", std::string{});
        if (!seen.insert(q.query_id).second) {
            throw Error("duplicate query_id " + q.query_id + " in " + path.string());
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

struct CampaignConfig {
    PipelineConfig pipeline;
    FieldIndexSet::Options index_options;
    std::vector<std::string> strategies{"identity"};
    std::vector<OptimizationScope> scopes{OptimizationScope::Both};
    uint64_t run_seed = 1;
    int parallelism = 1;
    std::string reranker_label = "builtin-overlap";
    std::string generator_label = "mock";
    std::string optimizer_label = "identity";
};

struct CampaignResult {
    std::vector<InstanceResult> results;  // ordered by (query, strategy, scope)
    std::vector<std::string> skipped_queries;  // empty reranked list → no target
    int failed_instances = 0;
    int scope_violations = 0;
    std::string snapshot_id;
};

// Runs the baseline once per query, draws the target, then evaluates every
// strategy × scope cell against it. Work items are independent; the worker
// pool writes into pre-assigned slots, so output order and content never
// depend on scheduling.
inline CampaignResult run_campaign(const std::vector<QueryRecord>& queries,
                                   const CorpusSnapshot& snapshot, const FieldIndexSet& index,
                                   const StrategyRegistry& registry, DocumentRewriter& rewriter,
                                   const PipelineBindings& bindings, const CampaignConfig& config) {
    for (const auto& name : config.strategies) registry.get(name);  // fail fast on unknown names
    if (config.scopes.empty() || config.strategies.empty()) {
        throw Error("campaign needs at least one strategy and one scope");
    }

    CampaignResult campaign;
    campaign.snapshot_id = snapshot.snapshot_id();

    struct QueryBaseline {
        EvalInstance instance;
        StageTrace trace;
        bool usable = false;
        bool failed = false;
        std::string failure_stage;
    };
    std::vector<QueryBaseline> baselines(queries.size());

    const int workers = std::max(1, config.parallelism);
    auto parallel_for = [workers](size_t count, auto&& body) {
        if (count == 0) return;
        std::atomic<size_t> next{0};
        auto run = [&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        };
        if (workers == 1 || count == 1) {
            run();
            return;
        }
        std::vector<std::thread> pool;
        const size_t n = std::min<size_t>(workers, count);
        pool.reserve(n);
        for (size_t t = 0; t < n; ++t) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    };

    parallel_for(queries.size(), [&](size_t qi) {
        const QueryRecord& query = queries[qi];
        QueryBaseline& baseline = baselines[qi];
        baseline.instance.query_id = query.query_id;
        baseline.instance.query = query.text;
        baseline.instance.domain = query.domain;
        baseline.instance.seed = instance_seed(config.run_seed, query.query_id);
        try {
            baseline.trace = run_pipeline(query.query_id, query.text, snapshot, index, bindings,
                                          config.pipeline);
            auto target = select_target(baseline.trace, baseline.instance.seed);
            if (target) {
                baseline.instance.target_doc_id = *target;
                baseline.usable = true;
            }
        } catch (const Error& e) {
            baseline.failed = true;
            baseline.failure_stage = e.stage().empty() ? "pipeline" : e.stage();
        } catch (const std::exception&) {
            baseline.failed = true;
            baseline.failure_stage = "pipeline";
        }
    });

    struct WorkItem {
        size_t query_index;
        std::string strategy;
        OptimizationScope scope;
    };
    std::vector<WorkItem> items;
    for (size_t qi = 0; qi < queries.size(); ++qi) {
        if (baselines[qi].failed) {
            ++campaign.failed_instances;
            continue;
        }
        if (!baselines[qi].usable) {
            campaign.skipped_queries.push_back(queries[qi].query_id);
            continue;
        }
        for (const auto& strategy : config.strategies) {
            for (const auto scope : config.scopes) {
                items.push_back({qi, strategy, scope});
            }
        }
    }

    campaign.results.resize(items.size());
    parallel_for(items.size(), [&](size_t i) {
        const WorkItem& item = items[i];
        const QueryBaseline& baseline = baselines[item.query_index];
        campaign.results[i] =
            evaluate_instance(baseline.instance, snapshot, index, baseline.trace,
                              registry.get(item.strategy), item.scope, rewriter, bindings,
                              config.pipeline, config.optimizer_label);
    });

    for (const auto& result : campaign.results) {
        if (result.failed) ++campaign.failed_instances;
        if (result.optimized.scope_violation) ++campaign.scope_violations;
    }
    return campaign;
}

// ---- results persistence ----------------------------------------------------

namespace campaign_detail {

inline nlohmann::ordered_json record_to_json(const VisibilityRecord& record, bool failed,
                                             const std::string& failure_stage) {
    nlohmann::ordered_json j{{"query_id", record.query_id},
                             {"domain", record.domain},
                             {"target_doc_id", record.target_doc_id},
                             {"side", record.side},
                             {"strategy", record.strategy},
                             {"scope", record.scope},
                             {"backend", record.backend},
                             {"snapshot_id", record.snapshot_id},
                             {"retrieval_rank", record.retrieval_rank},
                             {"reranking_rank", record.reranking_rank},
                             {"cited", record.cited}};
    if (record.cited) j["generation_rank"] = record.generation_rank;
    if (record.scope_violation) j["scope_violation"] = true;
    if (failed) {
        j["failed"] = true;
        j["failure_stage"] = failure_stage;
    }
    return j;
}

inline VisibilityRecord record_from_json(const nlohmann::ordered_json& j) {
    VisibilityRecord record;
    record.query_id = j.at("query_id").get<std::string>();
    record.domain = j.value("domain", std::string{});
    record.target_doc_id = j.value("target_doc_id", std::string{});
    record.side = j.at("side").get<std::string>();
    record.strategy = j.value("strategy", std::string{});
    record.scope = j.value("scope", std::string{});
    record.backend = j.value("backend", std::string{});
    record.snapshot_id = j.value("snapshot_id", std::string{});
    record.retrieval_rank = j.at("retrieval_rank").get<int>();
    record.reranking_rank = j.at("reranking_rank").get<int>();
    record.cited = j.at("cited").get<bool>();
    record.generation_rank = j.value("generation_rank", 0);
    record.scope_violation = j.value("scope_violation", false);
    return record;
}

}  // namespace campaign_detail

// One line per (instance, side); failed instances keep both lines, flagged,
// so aggregation can exclude and count them.
inline void write_results_file(const std::filesystem::path& path, const CampaignResult& campaign) {
    std::ostringstream out;
    for (const auto& result : campaign.results) {
        out << campaign_detail::record_to_json(result.baseline, result.failed, result.failure_stage)
                   .dump()
            << '\n';
        out << campaign_detail::record_to_json(result.optimized, result.failed,
                                               result.failure_stage)
                   .dump()
            << '\n';
    }
    write_file_atomic(path, out.str());
}

struct LoadedRecords {
    std::vector<VisibilityRecord> usable;
    int failed_instances = 0;
};

inline LoadedRecords read_results_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open results file " + path.string());
    LoadedRecords loaded;
    std::set<std::string> failed_keys;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto j = nlohmann::ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error("malformed results record at line " + std::to_string(line_no) + " of " +
                        path.string());
        }
        if (j.value("failed", false)) {
            failed_keys.insert(j.at("query_id").get<std::string>() + "\x1f" +
                               j.value("strategy", std::string{}) + "\x1f" +
                               j.value("scope", std::string{}));
            continue;
        }
        loaded.usable.push_back(campaign_detail::record_from_json(j));
    }
    loaded.failed_instances = static_cast<int>(failed_keys.size());
    return loaded;
}

}  // namespace stagevis

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stagevis/corpus.hpp"
#include "stagevis/error.hpp"
#include "stagevis/eval.hpp"

namespace stagevis {

struct ReportOptions {
    int metric_k_retrieval = 20;  // hit-rate cutoff at retrieval
    int k_rerank = 10;            // hit-rate cutoff at reranking, miss rank - 1
    bool gen_delta_co_cited_only = true;
};

struct ReportTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_tsv() const {
        std::ostringstream out;
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) out << '\t';
            out << header[i];
        }
        out << '\n';
        for (const auto& row : rows) {
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) out << '\t';
                out << row[i];
            }
            out << '\n';
        }
        return out.str();
    }
};

namespace report_detail {

inline std::string fmt(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

// Relative change vs. baseline: (value - baseline) / baseline.
inline std::string rel_change(double baseline, double value) {
    if (baseline == 0.0) return "n/a";
    return fmt((value - baseline) / baseline);
}

struct CellKey {
    std::string scope;
    std::string strategy;

    bool operator<(const CellKey& other) const {
        if (scope != other.scope) return scope < other.scope;
        return strategy < other.strategy;
    }
};

struct SideSplit {
    std::vector<VisibilityRecord> baseline;
    std::vector<VisibilityRecord> optimized;
    std::vector<VisibilityRecord> all;
};

inline void append_cell_row(ReportTable& table, const std::string& scope,
                            const std::string& strategy, const SideSplit& cell,
                            const ReportOptions& options) {
    StageMetrics base_ret = compute_metrics(cell.baseline, Stage::Retrieval,
                                            options.metric_k_retrieval);
    StageMetrics opt_ret = compute_metrics(cell.optimized, Stage::Retrieval,
                                           options.metric_k_retrieval);
    StageMetrics delta_ret = compute_metrics(cell.all, Stage::Retrieval,
                                             options.metric_k_retrieval);
    StageMetrics base_rr = compute_metrics(cell.baseline, Stage::Reranking, options.k_rerank);
    StageMetrics opt_rr = compute_metrics(cell.optimized, Stage::Reranking, options.k_rerank);
    StageMetrics delta_rr = compute_metrics(cell.all, Stage::Reranking, options.k_rerank);
    StageMetrics base_gen = compute_metrics(cell.baseline, Stage::Generation, options.k_rerank,
                                            options.gen_delta_co_cited_only);
    StageMetrics opt_gen = compute_metrics(cell.optimized, Stage::Generation, options.k_rerank,
                                           options.gen_delta_co_cited_only);
    StageMetrics delta_gen = compute_metrics(cell.all, Stage::Generation, options.k_rerank,
                                             options.gen_delta_co_cited_only);
    table.rows.push_back({scope, strategy, std::to_string(opt_ret.n),
                          fmt(base_ret.hit_rate), fmt(opt_ret.hit_rate),
                          rel_change(base_ret.hit_rate, opt_ret.hit_rate),
                          delta_ret.has_delta ? fmt(delta_ret.delta_rank) : "n/a",
                          fmt(base_rr.hit_rate), fmt(opt_rr.hit_rate),
                          rel_change(base_rr.hit_rate, opt_rr.hit_rate),
                          delta_rr.has_delta ? fmt(delta_rr.delta_rank) : "n/a",
                          fmt(base_gen.citation_rate), fmt(opt_gen.citation_rate),
                          rel_change(base_gen.citation_rate, opt_gen.citation_rate),
                          delta_gen.has_delta ? fmt(delta_gen.delta_rank) : "n/a"});
}

inline std::vector<std::string> visibility_header() {
    return {"scope",          "strategy",        "n",
            "ret_hit_base",   "ret_hit_opt",     "ret_hit_change",  "ret_delta_rank",
            "rerank_hit_base", "rerank_hit_opt", "rerank_hit_change", "rerank_delta_rank",
            "cite_base",      "cite_opt",        "cite_change",     "gen_delta_rank"};
}

}  // namespace report_detail

// One row per strategy × scope cell, in the per-stage hit-rate / rank-change
// layout (retrieval hit@K, reranking hit@K, citation rate, each with the
// relative change against the baseline side).
inline ReportTable build_visibility_table(const std::vector<VisibilityRecord>& records,
                                          const ReportOptions& options = {},
                                          bool collapse_strategies = false) {
    using report_detail::CellKey;
    std::map<CellKey, report_detail::SideSplit> cells;
    for (const auto& record : records) {
        CellKey key{record.scope, collapse_strategies ? std::string("all") : record.strategy};
        auto& cell = cells[key];
        cell.all.push_back(record);
        if (record.side == "baseline") cell.baseline.push_back(record);
        if (record.side == "optimized") cell.optimized.push_back(record);
    }
    ReportTable table;
    table.name = collapse_strategies ? "visibility_by_scope" : "visibility";
    table.header = report_detail::visibility_header();
    for (const auto& [key, cell] : cells) {
        report_detail::append_cell_row(table, key.scope, key.strategy, cell, options);
    }
    return table;
}

// Per-domain deltas: citation-rate change plus mean rank change per stage.
inline ReportTable build_domain_table(const std::vector<VisibilityRecord>& records,
                                      const ReportOptions& options = {}) {
    std::map<std::string, report_detail::SideSplit> domains;
    for (const auto& record : records) {
        auto& cell = domains[record.domain.empty() ? "(none)" : record.domain];
        cell.all.push_back(record);
        if (record.side == "baseline") cell.baseline.push_back(record);
        if (record.side == "optimized") cell.optimized.push_back(record);
    }
    ReportTable table;
    table.name = "domains";
    table.header = {"domain",        "n",          "cite_base",      "cite_opt",
                    "cite_change",   "ret_delta_rank", "rerank_delta_rank", "gen_delta_rank"};
    for (const auto& [domain, cell] : domains) {
        StageMetrics base_gen =
            compute_metrics(cell.baseline, Stage::Generation, options.k_rerank);
        StageMetrics opt_gen =
            compute_metrics(cell.optimized, Stage::Generation, options.k_rerank);
        StageMetrics delta_ret =
            compute_metrics(cell.all, Stage::Retrieval, options.metric_k_retrieval);
        StageMetrics delta_rr = compute_metrics(cell.all, Stage::Reranking, options.k_rerank);
        StageMetrics delta_gen = compute_metrics(cell.all, Stage::Generation, options.k_rerank,
                                                 options.gen_delta_co_cited_only);
        table.rows.push_back(
            {domain, std::to_string(opt_gen.n), report_detail::fmt(base_gen.citation_rate),
             report_detail::fmt(opt_gen.citation_rate),
             report_detail::rel_change(base_gen.citation_rate, opt_gen.citation_rate),
             delta_ret.has_delta ? report_detail::fmt(delta_ret.delta_rank) : "n/a",
             delta_rr.has_delta ? report_detail::fmt(delta_rr.delta_rank) : "n/a",
             delta_gen.has_delta ? report_detail::fmt(delta_gen.delta_rank) : "n/a"});
    }
    return table;
}

// Win rates across optimizer backends at one stage. A backend wins an
// instance iff its optimized rank is strictly best among all backends for
// that instance; ties produce no winner. Only instances evaluated by every
// backend participate.
inline ReportTable build_win_rate_table(const std::vector<VisibilityRecord>& records, Stage stage,
                                        const ReportOptions& options = {}) {
    std::set<std::string> backends;
    // (query, strategy, scope) -> backend -> rank
    std::map<std::string, std::map<std::string, int>> instances;
    const int gen_miss = options.k_rerank + 1;
    for (const auto& record : records) {
        if (record.side != "optimized") continue;
        backends.insert(record.backend);
        int rank = 0;
        if (stage == Stage::Generation) {
            rank = record.cited ? record.generation_rank : gen_miss;
        } else {
            rank = record.stage_rank(stage);
        }
        instances[record.query_id + "\x1f" + record.strategy + "\x1f" + record.scope]
                 [record.backend] = rank;
    }
    std::map<std::string, int> wins;
    for (const auto& backend : backends) wins[backend] = 0;
    int complete = 0;
    for (const auto& [key, by_backend] : instances) {
        if (by_backend.size() != backends.size()) continue;
        ++complete;
        int best = 0;
        std::string winner;
        bool tie = false;
        for (const auto& [backend, rank] : by_backend) {
            if (winner.empty() || rank < best) {
                best = rank;
                winner = backend;
                tie = false;
            } else if (rank == best) {
                tie = true;
            }
        }
        if (!tie && !winner.empty()) ++wins[winner];
    }
    ReportTable table;
    table.name = std::string("win_rate_") + stage_label(stage);
    table.header = {"backend", "wins", "instances", "win_rate"};
    for (const auto& [backend, count] : wins) {
        table.rows.push_back({backend, std::to_string(count), std::to_string(complete),
                              complete > 0 ? report_detail::fmt(static_cast<double>(count) / complete)
                                           : "n/a"});
    }
    return table;
}

inline std::vector<ReportTable> build_report(const std::vector<VisibilityRecord>& records,
                                             const std::string& group_by,
                                             const ReportOptions& options = {}) {
    if (group_by == "strategy") return {build_visibility_table(records, options, false)};
    if (group_by == "scope") return {build_visibility_table(records, options, true)};
    if (group_by == "domain") return {build_domain_table(records, options)};
    if (group_by == "backend") {
        return {build_win_rate_table(records, Stage::Retrieval, options),
                build_win_rate_table(records, Stage::Reranking, options),
                build_win_rate_table(records, Stage::Generation, options)};
    }
    throw Error("unknown report grouping: " + group_by +
                " (expected strategy|scope|domain|backend)");
}

// Plain-text digest of the visibility table, one block per scope.
inline std::string summary_text(const std::vector<VisibilityRecord>& records,
                                const ReportOptions& options = {}) {
    ReportTable table = build_visibility_table(records, options, false);
    std::ostringstream out;
    out << "Stage visibility summary (hit@" << options.metric_k_retrieval << " retrieval, hit@"
        << options.k_rerank << " reranking, citation rate at generation; positive rank change = "
        << "improvement)\n";
    std::string current_scope;
    for (const auto& row : table.rows) {
        if (row[0] != current_scope) {
            current_scope = row[0];
            out << "\nscope: " << current_scope << "\n";
        }
        out << "  " << row[1] << " (n=" << row[2] << ")\n";
        out << "    retrieval  hit " << row[3] << " -> " << row[4] << " (change " << row[5]
            << "), rank change " << row[6] << "\n";
        out << "    reranking  hit " << row[7] << " -> " << row[8] << " (change " << row[9]
            << "), rank change " << row[10] << "\n";
        out << "    generation cite " << row[11] << " -> " << row[12] << " (change " << row[13]
            << "), rank change " << row[14] << "\n";
    }
    return out.str();
}

inline void write_report_files(const std::filesystem::path& dir,
                               const std::vector<VisibilityRecord>& records,
                               const ReportOptions& options = {}) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "visibility.tsv",
                      build_visibility_table(records, options, false).to_tsv());
    write_file_atomic(dir / "visibility_by_scope.tsv",
                      build_visibility_table(records, options, true).to_tsv());
    write_file_atomic(dir / "domains.tsv", build_domain_table(records, options).to_tsv());
    std::ostringstream wins;
    for (Stage stage : {Stage::Retrieval, Stage::Reranking, Stage::Generation}) {
        ReportTable table = build_win_rate_table(records, stage, options);
        wins << "# " << table.name << "\n" << table.to_tsv();
    }
    write_file_atomic(dir / "win_rates.tsv", wins.str());
    write_file_atomic(dir / "summary.txt", summary_text(records, options));
}

}  // namespace stagevis

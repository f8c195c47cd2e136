// Acceptance gate for the visibility engine: eleven self-contained checks,
// one line of output each, nonzero exit if any of them fails. Everything
// runs offline against the committed fixtures and builtin backends.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stagevis/stagevis.hpp"

#include "oracle.hpp"

using namespace stagevis;

namespace {

int failures = 0;

struct Checker {
    bool ok = true;
    std::string detail;

    void expect(bool condition, const std::string& what) {
        if (!condition && ok) {  // keep the first failure for the report
            ok = false;
            detail = what;
        }
    }
};

template <typename Fn>
void criterion(int id, const char* label, Fn body) {
    Checker c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("unexpected exception: ") + e.what());
    }
    std::printf("criterion %2d: %s  %s\n", id, c.ok ? "PASS" : "FAIL", label);
    if (!c.ok) {
        std::printf("              ^ %s\n", c.detail.c_str());
        ++failures;
    }
}

std::string fixture(const char* name) {
    return (std::filesystem::path(FIXTURE_DIR) / name).string();
}

CorpusSnapshot load_fixture(const char* name) {
    auto docs = CorpusSnapshot::read_corpus_file(fixture(name));
    return CorpusSnapshot::ingest(std::move(docs));
}

struct BuiltinStack {
    OverlapScorer scorer;
    MockGenerator generator;
    PipelineBindings bindings{&scorer, &generator};
    StrategyRegistry registry = StrategyRegistry::with_defaults();
};

CampaignResult identity_campaign(const CorpusSnapshot& snapshot, const FieldIndexSet& index,
                                 const std::vector<QueryRecord>& queries, BuiltinStack& stack,
                                 CampaignConfig config) {
    IdentityRewriter rewriter;
    return run_campaign(queries, snapshot, index, stack.registry, rewriter, stack.bindings,
                        config);
}

}  // namespace

int main() {
    std::printf("stage visibility engine: acceptance checks\n\n");

    criterion(1, "baseline reranking hit@10 is exactly 1.0 for every campaign, corpus, and seed",
              [](Checker& c) {
        struct Setup {
            const char* corpus;
            std::vector<QueryRecord> queries;
        };
        std::vector<Setup> setups;
        setups.push_back({"campaign_corpus.jsonl", read_query_file(fixture("campaign_queries.jsonl"))});
        setups.push_back({"rrf_corpus.jsonl",
                          {{"vd", "vitamin d dosage for adults", ""},
                           {"ca", "calcium rich foods", ""},
                           {"sun", "sunlight and vitamin d synthesis", ""},
                           {"bone", "bone health", ""}}});
        for (const auto& setup : setups) {
            CorpusSnapshot snapshot = load_fixture(setup.corpus);
            FieldIndexSet index = FieldIndexSet::build(snapshot);
            BuiltinStack stack;
            for (uint64_t seed : {uint64_t{1}, uint64_t{7}, uint64_t{99}}) {
                CampaignConfig config;
                config.run_seed = seed;
                auto campaign = identity_campaign(snapshot, index, setup.queries, stack, config);
                c.expect(!campaign.results.empty(),
                         std::string(setup.corpus) + ": campaign produced no instances");
                std::vector<VisibilityRecord> baselines;
                for (const auto& r : campaign.results) {
                    c.expect(!r.failed, std::string(setup.corpus) + ": instance failed");
                    baselines.push_back(r.baseline);
                }
                StageMetrics m = compute_metrics(baselines, Stage::Reranking, 10);
                c.expect(m.hit_rate == 1.0,
                         std::string(setup.corpus) + " seed " + std::to_string(seed) +
                             ": baseline reranking hit rate " + std::to_string(m.hit_rate));
            }
        }
    });

    criterion(2, "fused retrieval matches a brute-force rank-fusion oracle to 1e-9",
              [](Checker& c) {
        CorpusSnapshot snapshot = load_fixture("rrf_corpus.jsonl");
        FieldIndexSet index = FieldIndexSet::build(snapshot);
        const std::vector<std::string> queries = {
            "vitamin d dosage for adults", "vitamin d",   "calcium absorption",
            "sunlight synthesis skin",     "immune system", "daily dosage recommendations",
            "bone health"};
        for (const auto& query : queries) {
            auto got = index.retrieve(query, 100);
            auto want = oracle::rrf_rank(snapshot, query);
            c.expect(got.size() == want.size(), query + ": result counts differ");
            if (got.size() != want.size()) continue;
            for (size_t i = 0; i < got.size(); ++i) {
                c.expect(got[i].passage_id == want[i].id,
                         query + ": rank " + std::to_string(i + 1) + " is " + got[i].passage_id +
                             ", oracle says " + want[i].id);
                c.expect(std::abs(got[i].score - want[i].score) <= 1e-9,
                         query + ": score drift at rank " + std::to_string(i + 1));
            }
        }
    });

    criterion(3, "per-field scores match hand-computed Okapi values (k1=1.2, b=0.75) to 1e-9",
              [](Checker& c) {
        std::vector<DocumentContent> docs(3);
        docs[0].doc_id = "a";
        docs[0].body = "vitamin d helps calcium absorption";
        docs[1].doc_id = "b";
        docs[1].body = "vitamin c boosts immunity and vitamin d synthesis";
        docs[2].doc_id = "c";
        docs[2].body = "calcium rich foods support bone health";
        CorpusSnapshot snapshot = CorpusSnapshot::ingest(std::move(docs));
        FieldIndexSet index = FieldIndexSet::build(snapshot);

        auto ranked = index.field_rank(FieldId::Passage, "vitamin d");
        c.expect(ranked.size() == 2, "expected exactly the two matching passages");
        if (ranked.size() == 2) {
            c.expect(ranked[0].passage_id == "a:0", "best passage should be a:0");
            c.expect(std::abs(ranked[0].score - 1.028594329972343) <= 1e-9,
                     "a:0 score " + std::to_string(ranked[0].score));
            c.expect(ranked[1].passage_id == "b:0", "second passage should be b:0");
            c.expect(std::abs(ranked[1].score - 1.0260427380590298) <= 1e-9,
                     "b:0 score " + std::to_string(ranked[1].score));
        }

        // the independent brute-force path lands on the same values
        std::map<std::string, std::vector<std::string>> units;
        for (const auto& [doc_id, doc] : snapshot.documents()) {
            units[doc_id + ":0"] = index_tokens(doc.body);
        }
        auto oracle_ranked = oracle::bm25_rank(units, index_tokens("vitamin d"));
        c.expect(oracle_ranked.size() == 2, "oracle should agree on the match set");
        for (size_t i = 0; i < std::min(ranked.size(), oracle_ranked.size()); ++i) {
            c.expect(std::abs(ranked[i].score - oracle_ranked[i].score) <= 1e-9,
                     "library and oracle disagree at rank " + std::to_string(i + 1));
        }
    });

    criterion(4, "chunking covers every body at stride 192 with the last-window rule, 1000 cases",
              [](Checker& c) {
        std::mt19937 rng(4242);
        std::uniform_int_distribution<int> length(0, 5000);
        const ChunkConfig config;
        for (int trial = 0; trial < 1000; ++trial) {
            const int n = length(rng);
            std::vector<std::string> tokens;
            tokens.reserve(n);
            std::ostringstream body;
            for (int i = 0; i < n; ++i) {
                tokens.push_back("tok" + std::to_string(i));
                if (i) body << ' ';
                body << tokens.back();
            }
            auto passages = chunk_body(body.str(), "d", config);
            if (n == 0) {
                c.expect(passages.empty(), "empty body must produce no passages");
                continue;
            }
            c.expect(!passages.empty(), "non-empty body produced no passages");
            for (size_t k = 0; k < passages.size(); ++k) {
                const Passage& p = passages[k];
                const int begin = static_cast<int>(k) * config.stride();
                const int end = std::min(begin + config.size, n);
                c.expect(p.span == TokenSpan{begin, end},
                         "trial " + std::to_string(trial) + ": passage " + std::to_string(k) +
                             " span [" + std::to_string(p.span.begin) + "," +
                             std::to_string(p.span.end) + ")");
                c.expect(p.seq_index == static_cast<int>(k) && p.passage_id == make_passage_id("d", p.seq_index),
                         "trial " + std::to_string(trial) + ": passage numbering");
                std::ostringstream expected;
                for (int i = begin; i < end; ++i) {
                    if (i > begin) expected << ' ';
                    expected << tokens[i];
                }
                c.expect(p.text == expected.str(),
                         "trial " + std::to_string(trial) + ": passage text mismatch");
                if (k + 1 < passages.size()) {
                    c.expect(p.span.end < n, "only the last window may reach the body's end");
                }
            }
            c.expect(passages.back().span.end == n,
                     "trial " + std::to_string(trial) + ": body not fully covered");
            if (!c.ok) break;
        }
    });

    criterion(5, "document rank is the best passage position, k+1 on a miss, 10000 cases",
              [](Checker& c) {
        std::mt19937 rng(777);
        for (int trial = 0; trial < 10000; ++trial) {
            const bool rerank_context = rng() % 2 == 0;
            const int miss = rerank_context ? 11 : 101;
            const int entries = static_cast<int>(rng() % (rerank_context ? 12 : 110));
            RankedList list;
            list.stage = rerank_context ? "reranking" : "retrieval";
            double score = 1000.0;
            for (int i = 0; i < entries; ++i) {
                std::string doc = "d" + std::to_string(rng() % 8);
                list.entries.push_back(
                    {doc + ":" + std::to_string(rng() % 3), doc, score -= 1.0});
            }
            const std::string target = "d" + std::to_string(rng() % 10);  // d8/d9 never occur
            int expected = miss;
            for (size_t i = 0; i < list.entries.size(); ++i) {
                if (list.entries[i].doc_id == target) {
                    expected = static_cast<int>(i + 1);
                    break;
                }
            }
            const int got = doc_rank(list, target, miss);
            c.expect(got == expected, "trial " + std::to_string(trial) + ": rank " +
                                          std::to_string(got) + " != " + std::to_string(expected));
            if (!c.ok) break;
        }
    });

    criterion(6, "a no-op rewrite leaves rank change at exactly 0 and citations identical, 60 instances",
              [](Checker& c) {
        CorpusSnapshot snapshot = load_fixture("campaign_corpus.jsonl");
        FieldIndexSet index = FieldIndexSet::build(snapshot);
        BuiltinStack stack;
        auto queries = read_query_file(fixture("campaign_queries.jsonl"));
        CampaignConfig config;
        auto campaign = identity_campaign(snapshot, index, queries, stack, config);

        c.expect(campaign.results.size() >= 50,
                 "need at least 50 instances, got " + std::to_string(campaign.results.size()));
        c.expect(campaign.failed_instances == 0, "instances failed");
        std::vector<VisibilityRecord> records;
        for (const auto& r : campaign.results) {
            c.expect(r.baseline.retrieval_rank == r.optimized.retrieval_rank &&
                         r.baseline.reranking_rank == r.optimized.reranking_rank &&
                         r.baseline.cited == r.optimized.cited &&
                         r.baseline.generation_rank == r.optimized.generation_rank,
                     r.instance.query_id + ": a stage moved under the identity strategy");
            c.expect(r.baseline_trace.response.citations == r.optimized_trace.response.citations,
                     r.instance.query_id + ": citation sets differ");
            records.push_back(r.baseline);
            records.push_back(r.optimized);
        }
        StageMetrics ret = compute_metrics(records, Stage::Retrieval, 20);
        StageMetrics rer = compute_metrics(records, Stage::Reranking, 10);
        StageMetrics gen = compute_metrics(records, Stage::Generation, 10);
        c.expect(ret.has_delta && ret.delta_rank == 0.0, "retrieval rank change nonzero");
        c.expect(rer.has_delta && rer.delta_rank == 0.0, "reranking rank change nonzero");
        c.expect(!gen.has_delta || gen.delta_rank == 0.0, "generation rank change nonzero");
    });

    criterion(7, "no strategy template lets an edit escape its scope, all strategies x scopes x documents",
              [](Checker& c) {
        CorpusSnapshot snapshot = load_fixture("rrf_corpus.jsonl");
        StrategyRegistry registry = StrategyRegistry::with_defaults();
        registry.set_autogeo_rules(
            "Prefer concise, directly quotable sentences with concrete numbers.");
        AppendMarkerRewriter rewriter(" zz-marker", /*ignore_scope=*/false);
        for (const auto& name : registry.names()) {
            for (OptimizationScope scope : {OptimizationScope::BodyOnly,
                                            OptimizationScope::StructuralOnly,
                                            OptimizationScope::Both}) {
                for (const auto& [doc_id, doc] : snapshot.documents()) {
                    ApplyResult applied = apply_strategy(doc, registry.get(name), scope, rewriter);
                    const std::string tag = name + "/" + scope_name(scope) + "/" + doc_id;
                    c.expect(!applied.scope_violation, tag + ": violation flagged");
                    if (scope == OptimizationScope::BodyOnly) {
                        c.expect(applied.document.structural.title == doc.structural.title &&
                                     applied.document.structural.meta_description ==
                                         doc.structural.meta_description &&
                                     serialize_headings(applied.document.structural.headings) ==
                                         serialize_headings(doc.structural.headings) &&
                                     applied.document.structural.jsonld_text ==
                                         doc.structural.jsonld_text,
                                 tag + ": structural field changed under body-only scope");
                    } else if (scope == OptimizationScope::StructuralOnly) {
                        c.expect(applied.document.body == doc.body,
                                 tag + ": body changed under structural-only scope");
                    }
                }
            }
        }
    });

    criterion(8, "identical seeds and builtin backends reproduce results files byte for byte",
              [](Checker& c) {
        CorpusSnapshot snapshot = load_fixture("campaign_corpus.jsonl");
        FieldIndexSet index = FieldIndexSet::build(snapshot);
        BuiltinStack stack;
        auto queries = read_query_file(fixture("campaign_queries.jsonl"));
        CampaignConfig config;
        config.strategies = {"identity", "authoritative"};
        config.scopes = {OptimizationScope::StructuralOnly, OptimizationScope::Both};
        config.run_seed = 11;
        config.parallelism = 2;

        auto dir = std::filesystem::temp_directory_path() / "stagevis-acceptance";
        std::filesystem::create_directories(dir);
        std::string dumps[2];
        for (int run = 0; run < 2; ++run) {
            auto campaign = identity_campaign(snapshot, index, queries, stack, config);
            auto path = dir / ("run-" + std::to_string(run) + ".jsonl");
            write_results_file(path, campaign);
            std::ifstream in(path, std::ios::binary);
            dumps[run] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
            c.expect(!dumps[run].empty(), "results file came out empty");
        }
        c.expect(dumps[0] == dumps[1], "two runs with seed 11 differ");
        std::filesystem::remove_all(dir);
    });

    criterion(9, "stage metrics on a hand-built four-instance record set match manual arithmetic",
              [](Checker& c) {
        auto record = [](const char* query, const char* side, int ret, int rer, bool cited,
                         int gen) {
            VisibilityRecord r;
            r.query_id = query;
            r.side = side;
            r.retrieval_rank = ret;
            r.reranking_rank = rer;
            r.cited = cited;
            r.generation_rank = gen;
            return r;
        };
        const std::vector<VisibilityRecord> base = {record("q1", "baseline", 5, 2, true, 1),
                                                    record("q2", "baseline", 25, 11, false, 0),
                                                    record("q3", "baseline", 101, 11, false, 0),
                                                    record("q4", "baseline", 10, 5, true, 2)};
        const std::vector<VisibilityRecord> opt = {record("q1", "optimized", 3, 1, true, 1),
                                                   record("q2", "optimized", 15, 4, true, 2),
                                                   record("q3", "optimized", 80, 11, false, 0),
                                                   record("q4", "optimized", 12, 8, false, 0)};
        std::vector<VisibilityRecord> all = base;
        all.insert(all.end(), opt.begin(), opt.end());

        c.expect(compute_metrics(base, Stage::Retrieval, 20).hit_rate == 0.5,
                 "baseline retrieval hit rate");
        c.expect(compute_metrics(opt, Stage::Retrieval, 20).hit_rate == 0.75,
                 "optimized retrieval hit rate");
        StageMetrics ret = compute_metrics(all, Stage::Retrieval, 20);
        c.expect(ret.has_delta && ret.delta_n == 4 && ret.delta_rank == 7.75,
                 "retrieval rank change should be (2+10+21-2)/4 = 7.75");

        c.expect(compute_metrics(base, Stage::Reranking, 10).hit_rate == 0.5,
                 "baseline reranking hit rate");
        c.expect(compute_metrics(opt, Stage::Reranking, 10).hit_rate == 0.75,
                 "optimized reranking hit rate");
        StageMetrics rer = compute_metrics(all, Stage::Reranking, 10);
        c.expect(rer.has_delta && rer.delta_rank == 1.25,
                 "reranking rank change should be (1+7+0-3)/4 = 1.25");

        c.expect(compute_metrics(base, Stage::Generation, 10).citation_rate == 0.5,
                 "baseline citation rate");
        c.expect(compute_metrics(opt, Stage::Generation, 10).citation_rate == 0.5,
                 "optimized citation rate");
        StageMetrics gen = compute_metrics(all, Stage::Generation, 10);
        c.expect(gen.has_delta && gen.delta_n == 1 && gen.delta_rank == 0.0,
                 "generation rank change over the one co-cited pair should be 0");
    });

    criterion(10, "citation markers parse with first-appearance order and exact malformed counts",
              [](Checker& c) {
        auto slot = [](const char* pid, const char* doc) {
            ContextCandidate s;
            s.passage_id = pid;
            s.doc_id = doc;
            return s;
        };
        GenerationContext three;
        three.candidates = {slot("a:0", "alpha"), slot("b:0", "beta"), slot("c:0", "gamma")};

        GeneratedResponse r;
        parse_citations("According to [2], and also [1]; then [2] again.", three, r);
        const std::vector<Citation> expected = {{1, 2, "beta"}, {2, 1, "alpha"}};
        c.expect(r.citations == expected, "first-appearance order broken");
        c.expect(r.malformed_markers == 1 && r.duplicate_markers == 1,
                 "the repeated [2] must count as malformed and duplicate");

        parse_citations("Only [7] is cited here.", three, r);
        c.expect(r.citations.empty() && r.malformed_markers == 1 && r.duplicate_markers == 0,
                 "out-of-range marker must be malformed only");

        GenerationContext repeated;
        repeated.candidates = {slot("a:0", "a"), slot("b:0", "b"), slot("c:0", "c"),
                               slot("c:1", "c")};
        parse_citations("x [3] y [4]", repeated, r);
        const std::vector<Citation> dedup = {{1, 3, "c"}};
        c.expect(r.citations == dedup, "same document via another slot must deduplicate");
        c.expect(r.malformed_markers == 1 && r.duplicate_markers == 1,
                 "the second slot of the same document counts as a duplicate");
    });

    criterion(11, "verbatim quotes from all five document regions attribute to their region at 1.0",
              [](Checker& c) {
        CorpusSnapshot snapshot = load_fixture("rrf_corpus.jsonl");
        const DocumentContent& doc = snapshot.document("vitd-dosage");
        const std::pair<std::string, std::string> cases[] = {
            {"title", "Vitamin D Dosage Guide for Adults"},
            {"meta_description", "dosage recommendations for adults, with deficiency and safety notes"},
            {"headings", "Recommended Daily Intake"},
            {"jsonld", "datePublished 2019 audience adults"},
            {"body", "Older adults above seventy years generally need the higher end of the dosage range"},
        };
        for (const auto& [region, quote] : cases) {
            QuoteLocation location = locate_quote(quote, doc);
            c.expect(location.region == region,
                     region + " quote attributed to " + location.region);
            c.expect(location.similarity == 1.0,
                     region + " similarity " + std::to_string(location.similarity));
        }

        // the per-citation wrapper reports the same attribution
        GenerationContext context;
        ContextCandidate candidate;
        candidate.passage_id = "vitd-dosage:0";
        candidate.doc_id = "vitd-dosage";
        context.candidates.push_back(candidate);
        GeneratedResponse response;
        response.text = "Quote. [1]";
        response.citations = {{1, 1, "vitd-dosage"}};
        response.quotes[1] = cases[0].second;
        auto entries = citation_provenance(response, context, snapshot);
        c.expect(entries.size() == 1 && entries[0].region == "title" &&
                     entries[0].similarity == 1.0,
                 "citation-level provenance disagrees with the quote locator");
    });

    std::printf("\n%d/11 criteria passed\n", 11 - failures);
    return failures == 0 ? 0 : 1;
}

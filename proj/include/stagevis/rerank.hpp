#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "stagevis/error.hpp"
#include "stagevis/index.hpp"
#include "stagevis/text.hpp"

namespace stagevis {

// Connection settings for an external scoring service; unused by the builtin
// scorer but recorded for provenance either way.
struct RerankerBinding {
    std::string kind = "builtin-overlap";  // "builtin-overlap" | "external-service"
    std::string endpoint;
    int timeout_ms = 30000;
    int max_batch = 32;
    int retries = 2;
    int backoff_ms = 250;
};

// Fraction of distinct query terms present in the passage. Bounded [0, 1];
// an empty query scores zero everywhere.
inline double overlap_score(const std::string& query, const std::string& passage) {
    std::vector<std::string> query_terms = index_tokens(query);
    std::set<std::string> distinct(query_terms.begin(), query_terms.end());
    if (distinct.empty()) return 0.0;
    std::vector<std::string> passage_terms = index_tokens(passage);
    std::set<std::string> present(passage_terms.begin(), passage_terms.end());
    size_t hit = 0;
    for (const auto& term : distinct) {
        if (present.count(term)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(distinct.size());
}

struct RerankCandidate {
    std::string passage_id;
    std::string doc_id;
    std::string text;
};

// External contract: a scorer sees (query, [{id, text}]) and returns one score
// per id. It never reorders anything — ordering and tie-breaks stay here.
class PassageScorer {
public:
    virtual ~PassageScorer() = default;
    virtual std::vector<double> score(const std::string& query,
                                      const std::vector<RerankCandidate>& batch) = 0;
};

class OverlapScorer final : public PassageScorer {
public:
    std::vector<double> score(const std::string& query,
                              const std::vector<RerankCandidate>& batch) override {
        std::vector<double> scores;
        scores.reserve(batch.size());
        for (const auto& c : batch) scores.push_back(overlap_score(query, c.text));
        return scores;
    }
};

// Scores every candidate and keeps the top_k. Candidates are canonicalized by
// passage_id before scoring, so the outcome is independent of input order and
// of any scores attached upstream.
inline std::vector<ScoredPassage> rerank_candidates(PassageScorer& scorer,
                                                    const std::string& query,
                                                    std::vector<RerankCandidate> candidates,
                                                    size_t top_k, int max_batch = 32) {
    if (max_batch <= 0) throw Error("max_batch must be positive", "reranking");
    std::sort(candidates.begin(), candidates.end(),
              [](const RerankCandidate& a, const RerankCandidate& b) {
                  return a.passage_id < b.passage_id;
              });
    for (size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].passage_id == candidates[i - 1].passage_id) {
            throw Error("duplicate candidate passage_id: " + candidates[i].passage_id, "reranking");
        }
    }
    std::vector<ScoredPassage> scored;
    scored.reserve(candidates.size());
    for (size_t begin = 0; begin < candidates.size(); begin += max_batch) {
        const size_t end = std::min(begin + static_cast<size_t>(max_batch), candidates.size());
        std::vector<RerankCandidate> batch(candidates.begin() + begin, candidates.begin() + end);
        std::vector<double> scores = scorer.score(query, batch);
        if (scores.size() != batch.size()) {
            throw Error("scorer returned " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(batch.size()) + " passages",
                        "reranking");
        }
        for (size_t i = 0; i < batch.size(); ++i) {
            scored.push_back({batch[i].passage_id, batch[i].doc_id, scores[i]});
        }
    }
    sort_ranked(scored);
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

}  // namespace stagevis

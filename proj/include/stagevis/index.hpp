#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stagevis/corpus.hpp"
#include "stagevis/error.hpp"
#include "stagevis/text.hpp"

namespace stagevis {

enum class FieldId : int { Title = 0, MetaDescription = 1, Headings = 2, JsonldText = 3, Passage = 4 };

inline constexpr int kFieldCount = 5;

inline const char* field_name(FieldId f) { return kFieldNames[static_cast<int>(f)]; }

inline FieldId field_from_name(const std::string& name) {
    for (int i = 0; i < kFieldCount; ++i) {
        if (name == kFieldNames[i]) return static_cast<FieldId>(i);
    }
    throw Error("unknown field name: " + name);
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

struct ScoredPassage {
    std::string passage_id;
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredPassage&) const = default;
};

struct RankedList {
    std::string stage;  // "retrieval" | "reranking"
    std::vector<ScoredPassage> entries;
};

// Deterministic ordering shared by every ranking in the pipeline: score
// descending, then passage_id ascending.
inline void sort_ranked(std::vector<ScoredPassage>& entries) {
    std::sort(entries.begin(), entries.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_id < b.passage_id;
    });
}

namespace index_detail {

struct Posting {
    uint32_t unit = 0;  // index into the field's unit table
    uint32_t tf = 0;
};

struct FieldIndex {
    std::vector<std::string> unit_ids;          // units with non-empty text in this field
    std::vector<uint32_t> lengths;              // token counts, parallel to unit_ids
    double avgdl = 0.0;
    std::map<std::string, std::vector<Posting>> postings;  // term -> postings, sorted by unit

    size_t unit_count() const { return unit_ids.size(); }
};

// idf kept strictly positive so a matching term never *lowers* a score and
// "no overlap" is exactly "score zero".
inline double idf(size_t n_units, size_t df) {
    return std::log(1.0 + (static_cast<double>(n_units) - static_cast<double>(df) + 0.5) /
                              (static_cast<double>(df) + 0.5));
}

}  // namespace index_detail

struct IndexOptions {
    Bm25Params bm25;
    std::array<double, kFieldCount> field_weights{1.0, 1.0, 1.0, 1.0, 1.0};
    double rrf_kappa = 60.0;
};

// Per-field BM25 indexes over semantic units. A unit whose field is empty is
// simply absent from that field's index: it contributes nothing to document
// frequency or average length and can never rank for that field.
class FieldIndexSet {
public:
    using Options = IndexOptions;

    static FieldIndexSet build(const CorpusSnapshot& snapshot, Options options = Options()) {
        FieldIndexSet set;
        set.options_ = options;
        set.snapshot_id_ = snapshot.snapshot_id();
        for (const auto& [doc_id, doc] : snapshot.documents()) {
            std::vector<Passage> own;
            for (const auto& p : snapshot.passages()) {
                if (p.doc_id == doc_id) own.push_back(p);
            }
            for (const auto& unit : build_semantic_units(doc, own)) {
                set.add_unit(unit);
            }
        }
        set.finalize();
        return set;
    }

    static FieldIndexSet build(const std::vector<SemanticUnit>& units,
                               const std::map<std::string, std::string>& unit_doc,
                               Options options = Options()) {
        FieldIndexSet set;
        set.options_ = options;
        for (const auto& unit : units) set.add_unit(unit);
        set.unit_doc_ = unit_doc;
        set.finalize();
        return set;
    }

    const Options& options() const { return options_; }
    const std::string& snapshot_id() const { return snapshot_id_; }
    size_t unit_count() const { return unit_doc_.size(); }

    // BM25 ranking within one field. Query terms are iterated exactly as
    // tokenized (repeats count twice); units scoring zero are excluded.
    std::vector<ScoredPassage> field_rank(FieldId field, const std::string& query) const {
        const index_detail::FieldIndex& fi = fields_[static_cast<int>(field)];
        std::vector<double> scores(fi.unit_count(), 0.0);
        const Bm25Params& p = options_.bm25;
        for (const auto& term : index_tokens(query)) {
            auto it = fi.postings.find(term);
            if (it == fi.postings.end()) continue;
            const double idf = index_detail::idf(fi.unit_count(), it->second.size());
            for (const auto& posting : it->second) {
                const double tf = posting.tf;
                const double norm =
                    p.k1 * (1.0 - p.b + p.b * fi.lengths[posting.unit] / fi.avgdl);
                scores[posting.unit] += idf * (tf * (p.k1 + 1.0)) / (tf + norm);
            }
        }
        std::vector<ScoredPassage> ranked;
        for (size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] <= 0.0) continue;
            ranked.push_back({fi.unit_ids[i], doc_of(fi.unit_ids[i]), scores[i]});
        }
        sort_ranked(ranked);
        return ranked;
    }

    // Reciprocal rank fusion across the five field rankings: each field where
    // a unit ranks contributes weight / (kappa + rank) with rank 1-based.
    std::vector<ScoredPassage> retrieve(const std::string& query, size_t top_k) const {
        std::map<std::string, double> fused;
        for (int f = 0; f < kFieldCount; ++f) {
            const double weight = options_.field_weights[f];
            if (weight == 0.0) continue;
            auto ranked = field_rank(static_cast<FieldId>(f), query);
            for (size_t r = 0; r < ranked.size(); ++r) {
                fused[ranked[r].passage_id] +=
                    weight / (options_.rrf_kappa + static_cast<double>(r + 1));
            }
        }
        std::vector<ScoredPassage> out;
        out.reserve(fused.size());
        for (const auto& [passage_id, score] : fused) {
            out.push_back({passage_id, doc_of(passage_id), score});
        }
        sort_ranked(out);
        if (out.size() > top_k) out.resize(top_k);
        return out;
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::ordered_json root;
        root["format"] = "stagevis-index/1";
        root["snapshot_id"] = snapshot_id_;
        root["bm25"] = {{"k1", options_.bm25.k1}, {"b", options_.bm25.b}};
        root["rrf_kappa"] = options_.rrf_kappa;
        root["field_weights"] = options_.field_weights;
        nlohmann::ordered_json units = nlohmann::ordered_json::object();
        for (const auto& [unit_id, doc_id] : unit_doc_) units[unit_id] = doc_id;
        root["units"] = std::move(units);
        nlohmann::ordered_json fields = nlohmann::ordered_json::array();
        for (int f = 0; f < kFieldCount; ++f) {
            const auto& fi = fields_[f];
            nlohmann::ordered_json jf;
            jf["field"] = kFieldNames[f];
            jf["unit_ids"] = fi.unit_ids;
            jf["lengths"] = fi.lengths;
            nlohmann::ordered_json postings = nlohmann::ordered_json::object();
            for (const auto& [term, plist] : fi.postings) {
                nlohmann::ordered_json arr = nlohmann::ordered_json::array();
                for (const auto& posting : plist) arr.push_back({posting.unit, posting.tf});
                postings[term] = std::move(arr);
            }
            jf["postings"] = std::move(postings);
            fields.push_back(std::move(jf));
        }
        root["fields"] = std::move(fields);
        write_file_atomic(path, root.dump() + "\n");
    }

    static FieldIndexSet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open index file " + path.string());
        nlohmann::ordered_json root = nlohmann::ordered_json::parse(in, nullptr, false);
        if (root.is_discarded() || root.value("format", std::string{}) != "stagevis-index/1") {
            throw Error("unrecognized index format in " + path.string());
        }
        FieldIndexSet set;
        set.snapshot_id_ = root.value("snapshot_id", std::string{});
        set.options_.bm25.k1 = root.at("bm25").at("k1").get<double>();
        set.options_.bm25.b = root.at("bm25").at("b").get<double>();
        set.options_.rrf_kappa = root.at("rrf_kappa").get<double>();
        auto weights = root.at("field_weights");
        for (int f = 0; f < kFieldCount; ++f) set.options_.field_weights[f] = weights.at(f).get<double>();
        for (const auto& [unit_id, doc_id] : root.at("units").items()) {
            set.unit_doc_[unit_id] = doc_id.get<std::string>();
        }
        for (const auto& jf : root.at("fields")) {
            FieldId field = field_from_name(jf.at("field").get<std::string>());
            auto& fi = set.fields_[static_cast<int>(field)];
            fi.unit_ids = jf.at("unit_ids").get<std::vector<std::string>>();
            fi.lengths = jf.at("lengths").get<std::vector<uint32_t>>();
            for (const auto& [term, arr] : jf.at("postings").items()) {
                std::vector<index_detail::Posting> plist;
                for (const auto& pair : arr) {
                    plist.push_back({pair.at(0).get<uint32_t>(), pair.at(1).get<uint32_t>()});
                }
                fi.postings[term] = std::move(plist);
            }
            uint64_t total = 0;
            for (uint32_t len : fi.lengths) total += len;
            fi.avgdl = fi.lengths.empty() ? 0.0 : static_cast<double>(total) / fi.lengths.size();
        }
        return set;
    }

private:
    void add_unit(const SemanticUnit& unit) {
        if (unit_doc_.count(unit.passage_id)) {
            throw Error("duplicate passage_id in index build: " + unit.passage_id);
        }
        auto colon = unit.passage_id.rfind(':');
        unit_doc_[unit.passage_id] =
            colon == std::string::npos ? unit.passage_id : unit.passage_id.substr(0, colon);
        for (int f = 0; f < kFieldCount; ++f) {
            auto it = unit.elements.find(kFieldNames[f]);
            if (it == unit.elements.end() || it->second.empty()) continue;
            std::vector<std::string> terms = index_tokens(it->second);
            if (terms.empty()) continue;
            auto& fi = fields_[f];
            const uint32_t unit_index = static_cast<uint32_t>(fi.unit_ids.size());
            fi.unit_ids.push_back(unit.passage_id);
            fi.lengths.push_back(static_cast<uint32_t>(terms.size()));
            std::map<std::string, uint32_t> tf;
            for (const auto& term : terms) ++tf[term];
            for (const auto& [term, count] : tf) {
                fi.postings[term].push_back({unit_index, count});
            }
        }
    }

    void finalize() {
        for (auto& fi : fields_) {
            uint64_t total = 0;
            for (uint32_t len : fi.lengths) total += len;
            fi.avgdl = fi.lengths.empty() ? 0.0 : static_cast<double>(total) / fi.lengths.size();
        }
    }

    const std::string& doc_of(const std::string& passage_id) const {
        auto it = unit_doc_.find(passage_id);
        if (it == unit_doc_.end()) throw Error("passage missing from unit table: " + passage_id);
        return it->second;
    }

    Options options_;
    std::string snapshot_id_;
    std::array<index_detail::FieldIndex, kFieldCount> fields_;
    std::map<std::string, std::string> unit_doc_;  // passage_id -> doc_id
};

}  // namespace stagevis

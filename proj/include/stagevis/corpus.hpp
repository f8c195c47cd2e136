#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stagevis/error.hpp"
#include "stagevis/text.hpp"
#include "stagevis/webdoc.hpp"

namespace stagevis {

struct ChunkConfig {
    int size = 256;     // tokens per passage
    int overlap = 64;   // tokens shared by consecutive passages

    int stride() const { return size - overlap; }

    void validate() const {
        if (size <= 0 || overlap < 0 || overlap >= size) {
            throw Error("invalid chunk config: need 0 <= overlap < size");
        }
    }

    bool operator==(const ChunkConfig&) const = default;
};

struct TokenSpan {
    int begin = 0;  // inclusive, body-token coordinates
    int end = 0;    // exclusive

    bool operator==(const TokenSpan&) const = default;
};

struct Passage {
    std::string passage_id;  // doc_id + ":" + seq_index
    std::string doc_id;
    int seq_index = 0;
    std::string text;
    TokenSpan span;

    bool operator==(const Passage&) const = default;
};

inline std::string make_passage_id(const std::string& doc_id, int seq_index) {
    return doc_id + ":" + std::to_string(seq_index);
}

// A passage paired with its document's structural fields; the unit of
// retrieval and reranking.
struct SemanticUnit {
    std::string passage_id;
    std::map<std::string, std::string> elements;  // exactly the five field keys
};

inline constexpr const char* kFieldNames[5] = {"title", "meta_description", "headings",
                                               "jsonld_text", "passage"};

// Sliding-window chunking over whitespace word tokens. Passages start at
// multiples of stride; the last passage is the first whose end reaches the
// body's token count.
inline std::vector<Passage> chunk_body(const std::string& body, const std::string& doc_id,
                                       const ChunkConfig& config = {}) {
    config.validate();
    std::vector<std::string> tokens = word_tokens(body);
    std::vector<Passage> passages;
    const int total = static_cast<int>(tokens.size());
    if (total == 0) return passages;
    const int stride = config.stride();
    int seq = 0;
    for (int start = 0;; start += stride, ++seq) {
        int end = std::min(start + config.size, total);
        Passage p;
        p.doc_id = doc_id;
        p.seq_index = seq;
        p.passage_id = make_passage_id(doc_id, seq);
        p.span = {start, end};
        std::string text;
        for (int i = start; i < end; ++i) {
            if (i > start) text.push_back(' ');
            text += tokens[i];
        }
        p.text = std::move(text);
        passages.push_back(std::move(p));
        if (end == total) break;
    }
    return passages;
}

// One unit per passage; the four structural elements are copied verbatim from
// the document's serializations, so they are identical across a document.
inline std::vector<SemanticUnit> build_semantic_units(const DocumentContent& doc,
                                                      const std::vector<Passage>& passages) {
    std::vector<SemanticUnit> units;
    units.reserve(passages.size());
    const std::string headings = serialize_headings(doc.structural.headings);
    for (const auto& p : passages) {
        if (p.doc_id != doc.doc_id) throw Error("passage does not belong to document " + doc.doc_id);
        SemanticUnit unit;
        unit.passage_id = p.passage_id;
        unit.elements = {{"title", doc.structural.title},
                         {"meta_description", doc.structural.meta_description},
                         {"headings", headings},
                         {"jsonld_text", doc.structural.jsonld_text},
                         {"passage", p.text}};
        units.push_back(std::move(unit));
    }
    return units;
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    std::filesystem::rename(tmp, path);
}

namespace corpus_detail {

inline nlohmann::ordered_json document_to_json(const DocumentContent& doc) {
    nlohmann::ordered_json headings = nlohmann::ordered_json::array();
    for (const auto& h : doc.structural.headings) {
        headings.push_back({{"level", h.level}, {"text", h.text}});
    }
    return nlohmann::ordered_json{{"doc_id", doc.doc_id},
                                  {"url", doc.url},
                                  {"title", doc.structural.title},
                                  {"meta_description", doc.structural.meta_description},
                                  {"headings", std::move(headings)},
                                  {"jsonld_text", doc.structural.jsonld_text},
                                  {"body", doc.body}};
}

inline DocumentContent document_from_json(const nlohmann::ordered_json& record) {
    DocumentContent doc;
    doc.doc_id = record.at("doc_id").get<std::string>();
    doc.url = record.value("url", std::string{});
    doc.structural.title = record.value("title", std::string{});
    doc.structural.meta_description = record.value("meta_description", std::string{});
    if (record.contains("headings")) {
        for (const auto& h : record.at("headings")) {
            Heading heading;
            heading.level = h.at("level").get<int>();
            heading.text = h.at("text").get<std::string>();
            if (heading.level < 1 || heading.level > 6) {
                throw Error("heading level out of range in record " + doc.doc_id);
            }
            doc.structural.headings.push_back(std::move(heading));
        }
    }
    doc.structural.jsonld_text = record.value("jsonld_text", std::string{});
    doc.body = record.value("body", std::string{});
    return doc;
}

}  // namespace corpus_detail

// Immutable indexed corpus state: documents plus their chunked passages.
// Replacement never mutates; it builds a successor snapshot with a fresh id.
class CorpusSnapshot {
public:
    static CorpusSnapshot ingest(std::vector<DocumentContent> documents, ChunkConfig config = {}) {
        config.validate();
        CorpusSnapshot snapshot;
        snapshot.chunk_ = config;
        snapshot.generation_ = 0;
        for (auto& doc : documents) {
            if (snapshot.documents_.count(doc.doc_id)) {
                throw Error("duplicate doc_id in ingest: " + doc.doc_id);
            }
            snapshot.documents_.emplace(doc.doc_id, std::move(doc));
        }
        snapshot.rebuild_passages();
        snapshot.assign_id();
        return snapshot;
    }

    CorpusSnapshot replace_document(const std::string& doc_id, DocumentContent replacement) const {
        if (!documents_.count(doc_id)) throw Error("unknown doc_id in replace: " + doc_id);
        if (replacement.doc_id != doc_id) {
            throw Error("replacement doc_id mismatch: " + replacement.doc_id + " vs " + doc_id);
        }
        CorpusSnapshot next;
        next.chunk_ = chunk_;
        next.generation_ = generation_ + 1;
        next.documents_ = documents_;
        next.documents_.at(doc_id) = std::move(replacement);
        next.rebuild_passages();
        next.assign_id();
        return next;
    }

    const std::string& snapshot_id() const { return snapshot_id_; }
    uint64_t generation() const { return generation_; }
    const ChunkConfig& chunk_config() const { return chunk_; }
    const std::map<std::string, DocumentContent>& documents() const { return documents_; }
    const std::vector<Passage>& passages() const { return passages_; }
    size_t document_count() const { return documents_.size(); }

    const DocumentContent& document(const std::string& doc_id) const {
        auto it = documents_.find(doc_id);
        if (it == documents_.end()) throw Error("unknown doc_id: " + doc_id);
        return it->second;
    }

    const Passage* find_passage(const std::string& passage_id) const {
        auto it = passage_pos_.find(passage_id);
        return it == passage_pos_.end() ? nullptr : &passages_[it->second];
    }

    const Passage& passage(const std::string& passage_id) const {
        const Passage* p = find_passage(passage_id);
        if (!p) throw Error("unknown passage_id: " + passage_id);
        return *p;
    }

    std::vector<SemanticUnit> semantic_units(const std::string& doc_id) const {
        const DocumentContent& doc = document(doc_id);
        std::vector<Passage> own;
        for (const auto& p : passages_) {
            if (p.doc_id == doc_id) own.push_back(p);
        }
        return build_semantic_units(doc, own);
    }

    // Persistence: a directory holding the corpus records plus a manifest.
    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        std::ostringstream corpus;
        for (const auto& [doc_id, doc] : documents_) {
            corpus << corpus_detail::document_to_json(doc).dump() << '\n';
        }
        write_file_atomic(dir / "corpus.jsonl", corpus.str());
        nlohmann::ordered_json manifest{{"snapshot_id", snapshot_id_},
                                        {"generation", generation_},
                                        {"chunk_size", chunk_.size},
                                        {"chunk_overlap", chunk_.overlap},
                                        {"record_count", documents_.size()}};
        write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    }

    static CorpusSnapshot load(const std::filesystem::path& dir) {
        std::ifstream manifest_in(dir / "manifest.json");
        if (!manifest_in) throw Error("cannot open snapshot manifest in " + dir.string());
        nlohmann::ordered_json manifest = nlohmann::ordered_json::parse(manifest_in);
        ChunkConfig config;
        config.size = manifest.at("chunk_size").get<int>();
        config.overlap = manifest.at("chunk_overlap").get<int>();

        CorpusSnapshot snapshot;
        snapshot.chunk_ = config;
        snapshot.generation_ = manifest.value("generation", 0ULL);
        for (auto& doc : read_corpus_file(dir / "corpus.jsonl")) {
            if (snapshot.documents_.count(doc.doc_id)) {
                throw Error("duplicate doc_id in snapshot: " + doc.doc_id);
            }
            snapshot.documents_.emplace(doc.doc_id, std::move(doc));
        }
        if (manifest.at("record_count").get<size_t>() != snapshot.documents_.size()) {
            throw Error("snapshot record count mismatch in " + dir.string());
        }
        snapshot.rebuild_passages();
        snapshot.assign_id();
        if (snapshot.snapshot_id_ != manifest.at("snapshot_id").get<std::string>()) {
            throw Error("snapshot id mismatch in " + dir.string());
        }
        return snapshot;
    }

    static std::vector<DocumentContent> read_corpus_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open corpus file " + path.string());
        std::vector<DocumentContent> docs;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto record = nlohmann::ordered_json::parse(line, nullptr, false);
            if (record.is_discarded()) {
                throw Error("malformed corpus record at line " + std::to_string(line_no) + " of " +
                            path.string());
            }
            docs.push_back(corpus_detail::document_from_json(record));
        }
        return docs;
    }

    static void write_corpus_file(const std::filesystem::path& path,
                                  const std::vector<DocumentContent>& docs) {
        std::ostringstream out;
        for (const auto& doc : docs) {
            out << corpus_detail::document_to_json(doc).dump() << '\n';
        }
        write_file_atomic(path, out.str());
    }

private:
    void rebuild_passages() {
        passages_.clear();
        passage_pos_.clear();
        for (const auto& [doc_id, doc] : documents_) {
            for (auto& p : chunk_body(doc.body, doc_id, chunk_)) {
                passage_pos_.emplace(p.passage_id, passages_.size());
                passages_.push_back(std::move(p));
            }
        }
    }

    // Content-derived id: identical content and history produce identical ids
    // across runs; any replacement bumps the generation and changes the id.
    void assign_id() {
        uint64_t h = fnv1a64("snapshot");
        h = fnv1a64(std::to_string(generation_), h);
        h = fnv1a64(std::to_string(chunk_.size) + "/" + std::to_string(chunk_.overlap), h);
        for (const auto& [doc_id, doc] : documents_) {
            h = fnv1a64(corpus_detail::document_to_json(doc).dump(), h);
        }
        char buf[20];
        std::snprintf(buf, sizeof(buf), "s%016llx", static_cast<unsigned long long>(h));
        snapshot_id_ = buf;
    }

    std::string snapshot_id_;
    uint64_t generation_ = 0;
    ChunkConfig chunk_;
    std::map<std::string, DocumentContent> documents_;  // canonical order: by doc_id
    std::vector<Passage> passages_;
    std::unordered_map<std::string, size_t> passage_pos_;
};

}  // namespace stagevis

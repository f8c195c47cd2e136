#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stagevis/error.hpp"
#include "stagevis/index.hpp"
#include "stagevis/rerank.hpp"
#include "stagevis/text.hpp"

namespace stagevis {

// One numbered slot in the generation context: a reranked passage plus the
// structural fields the generator may quote from.
struct ContextCandidate {
    std::string passage_id;
    std::string doc_id;
    std::string title;
    std::string meta_description;
    std::string headings;
    std::string jsonld_text;
    std::string text;  // passage body
};

struct GenerationContext {
    std::string query;
    std::vector<ContextCandidate> candidates;  // 1-based numbering in rendered form
    bool include_jsonld = false;
};

struct Citation {
    int order = 0;          // 1-based position among distinct cited documents
    int context_index = 0;  // 1-based slot of the first marker citing the document
    std::string doc_id;

    bool operator==(const Citation&) const = default;
};

struct GeneratedResponse {
    std::string text;
    std::vector<Citation> citations;  // distinct documents, first-appearance order
    int malformed_markers = 0;          // ignored markers: out-of-range or document repeats
    int duplicate_markers = 0;          // the subset of malformed that were repeats
    std::map<int, std::string> quotes;  // context slot -> verbatim supporting quote
};

// Prompt block the generator sees: query followed by numbered sources.
// Structured-data text is omitted unless explicitly enabled; it is rarely
// prose and tends to pollute quoting.
inline std::string render_context(const GenerationContext& context) {
    std::ostringstream out;
    out << "Query: " << context.query << "\n\n";
    for (size_t i = 0; i < context.candidates.size(); ++i) {
        const ContextCandidate& c = context.candidates[i];
        out << "[" << (i + 1) << "] " << c.title << "\n";
        if (!c.meta_description.empty()) out << c.meta_description << "\n";
        if (!c.headings.empty()) out << c.headings << "\n";
        if (context.include_jsonld && !c.jsonld_text.empty()) out << c.jsonld_text << "\n";
        out << c.text << "\n\n";
    }
    return out.str();
}

// Builds the numbered context from a reranked list, preserving its order.
inline GenerationContext assemble_context(const std::string& query,
                                          std::vector<ScoredPassage> reranked,
                                          const CorpusSnapshot& snapshot, size_t k = 10,
                                          bool include_jsonld = false) {
    if (reranked.size() > k) reranked.resize(k);
    GenerationContext context;
    context.query = query;
    context.include_jsonld = include_jsonld;
    for (const auto& entry : reranked) {
        const Passage& passage = snapshot.passage(entry.passage_id);
        const DocumentContent& doc = snapshot.document(entry.doc_id);
        ContextCandidate c;
        c.passage_id = entry.passage_id;
        c.doc_id = entry.doc_id;
        c.title = doc.structural.title;
        c.meta_description = doc.structural.meta_description;
        c.headings = serialize_headings(doc.structural.headings);
        c.jsonld_text = doc.structural.jsonld_text;
        c.text = passage.text;
        context.candidates.push_back(std::move(c));
    }
    return context;
}

// Scans "[n]" markers left to right. Documents are deduplicated on first
// appearance; an ignored marker — outside [1, slots], or repeating an
// already-cited document (same or different passage) — counts toward
// malformed_markers, with repeats additionally tallied in duplicate_markers.
// Non-numeric bracket content is plain text.
inline void parse_citations(const std::string& text, const GenerationContext& context,
                            GeneratedResponse& response) {
    response.citations.clear();
    response.malformed_markers = 0;
    response.duplicate_markers = 0;
    std::set<std::string> seen_docs;
    size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string::npos) {
        size_t close = text.find(']', pos + 1);
        if (close == std::string::npos) break;
        std::string inner = text.substr(pos + 1, close - pos - 1);
        bool numeric = !inner.empty() &&
                       std::all_of(inner.begin(), inner.end(), [](char c) { return c >= '0' && c <= '9'; });
        if (!numeric) {
            ++pos;
            continue;
        }
        long slot = std::strtol(inner.c_str(), nullptr, 10);
        if (slot < 1 || slot > static_cast<long>(context.candidates.size())) {
            ++response.malformed_markers;
        } else {
            const std::string& doc_id = context.candidates[slot - 1].doc_id;
            if (seen_docs.count(doc_id)) {
                ++response.malformed_markers;
                ++response.duplicate_markers;
            } else {
                seen_docs.insert(doc_id);
                Citation citation;
                citation.order = static_cast<int>(response.citations.size()) + 1;
                citation.context_index = static_cast<int>(slot);
                citation.doc_id = doc_id;
                response.citations.push_back(std::move(citation));
            }
        }
        pos = close + 1;
    }
}

// What a backend hands back for one context: the answer text plus any
// verbatim quotes it claims to have drawn, keyed by context slot. Returned
// by value so backends stay stateless and safe to share across threads.
struct GeneratorOutput {
    std::string text;
    std::map<int, std::string> quotes;
};

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual GeneratorOutput generate(const GenerationContext& context) = 0;
};

namespace generate_detail {

inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string current;
    for (char ch : text) {
        current.push_back(ch);
        if (ch == '.' || ch == '!' || ch == '?') {
            std::string trimmed = normalize_text(current);
            if (!trimmed.empty()) sentences.push_back(std::move(trimmed));
            current.clear();
        }
    }
    std::string trimmed = normalize_text(current);
    if (!trimmed.empty()) sentences.push_back(std::move(trimmed));
    return sentences;
}

}  // namespace generate_detail

// Deterministic stand-in for an LLM answer: for each of the top context
// slots, quote the sentence with the highest query-term overlap (earliest
// sentence on ties, so a zero-overlap slot still gets quoted and cited) and
// append the slot's marker, in rank order.
class MockGenerator final : public GeneratorBackend {
public:
    explicit MockGenerator(size_t max_cited = 5) : max_cited_(max_cited) {}

    GeneratorOutput generate(const GenerationContext& context) override {
        GeneratorOutput output;
        std::ostringstream out;
        size_t cited = 0;
        for (size_t i = 0; i < context.candidates.size() && cited < max_cited_; ++i) {
            const ContextCandidate& c = context.candidates[i];
            std::string source = c.title + ". " + c.meta_description + ". " + c.text;
            std::vector<std::string> sentences = generate_detail::split_sentences(source);
            double best = -1.0;
            const std::string* best_sentence = nullptr;
            for (const auto& sentence : sentences) {
                double score = overlap_score(context.query, sentence);
                if (score > best) {
                    best = score;
                    best_sentence = &sentence;
                }
            }
            if (!best_sentence) continue;  // slot with no text at all
            if (cited > 0) out << ' ';
            out << *best_sentence << " [" << (i + 1) << "]";
            output.quotes[static_cast<int>(i + 1)] = *best_sentence;
            ++cited;
        }
        output.text = out.str();
        return output;
    }

private:
    size_t max_cited_;
};

inline GeneratedResponse generate_response(GeneratorBackend& backend,
                                           const GenerationContext& context) {
    GeneratorOutput output = backend.generate(context);
    GeneratedResponse response;
    response.text = std::move(output.text);
    response.quotes = std::move(output.quotes);
    parse_citations(response.text, context, response);
    return response;
}

}  // namespace stagevis

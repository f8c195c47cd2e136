#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stagevis/error.hpp"
#include "stagevis/text.hpp"
#include "stagevis/webdoc.hpp"

namespace stagevis {

enum class OptimizationScope { BodyOnly, StructuralOnly, Both };

inline const char* scope_name(OptimizationScope scope) {
    switch (scope) {
        case OptimizationScope::BodyOnly: return "body";
        case OptimizationScope::StructuralOnly: return "structural";
        case OptimizationScope::Both: return "both";
    }
    return "both";
}

inline OptimizationScope scope_from_name(const std::string& name) {
    if (name == "body") return OptimizationScope::BodyOnly;
    if (name == "structural") return OptimizationScope::StructuralOnly;
    if (name == "both") return OptimizationScope::Both;
    throw Error("unknown scope: " + name + " (expected body|structural|both)");
}

inline std::string scope_directive(OptimizationScope scope) {
    switch (scope) {
        case OptimizationScope::BodyOnly:
            return "Rewrite only the body text. The title, meta description, headings, and "
                   "structured data must be returned exactly as given.";
        case OptimizationScope::StructuralOnly:
            return "Rewrite only the structural fields: title, meta description, headings, and "
                   "structured data. The body text must be returned exactly as given.";
        case OptimizationScope::Both:
            return "You may rewrite both the body text and the structural fields.";
    }
    return {};
}

// A strategy is data: a prompt template over the closed placeholder set
// {title}, {meta_description}, {headings}, {jsonld_text}, {body}, {scope}.
struct StrategySpec {
    std::string name;
    std::string prompt_template;
    std::string notes;
};

// The five text fields a rewriting backend sees and returns. Headings travel
// as serialized text ("H<level> <text>" lines) and are reparsed afterwards.
struct RewriteFields {
    std::string title;
    std::string meta_description;
    std::string headings;
    std::string jsonld_text;
    std::string body;

    bool operator==(const RewriteFields&) const = default;
};

inline RewriteFields fields_of(const DocumentContent& doc) {
    return {doc.structural.title, doc.structural.meta_description,
            serialize_headings(doc.structural.headings), doc.structural.jsonld_text, doc.body};
}

class DocumentRewriter {
public:
    virtual ~DocumentRewriter() = default;
    virtual RewriteFields rewrite(const std::string& prompt, const RewriteFields& fields,
                                  OptimizationScope scope) = 0;
};

class IdentityRewriter final : public DocumentRewriter {
public:
    RewriteFields rewrite(const std::string&, const RewriteFields& fields,
                          OptimizationScope) override {
        return fields;
    }
};

// Test transform: appends a fixed marker to each in-scope field (or to every
// field when ignore_scope is set, to exercise the scope-enforcement path).
class AppendMarkerRewriter final : public DocumentRewriter {
public:
    explicit AppendMarkerRewriter(std::string marker = " zz-optimized", bool ignore_scope = false)
        : marker_(std::move(marker)), ignore_scope_(ignore_scope) {}

    RewriteFields rewrite(const std::string&, const RewriteFields& fields,
                          OptimizationScope scope) override {
        RewriteFields out = fields;
        const bool structural =
            ignore_scope_ || scope != OptimizationScope::BodyOnly;
        const bool body = ignore_scope_ || scope != OptimizationScope::StructuralOnly;
        if (structural) {
            out.title += marker_;
            out.meta_description += marker_;
            if (!out.headings.empty()) out.headings += marker_;
            out.jsonld_text += marker_;
        }
        if (body) out.body += marker_;
        return out;
    }

private:
    std::string marker_;
    bool ignore_scope_;
};

class FunctionRewriter final : public DocumentRewriter {
public:
    using Fn = std::function<RewriteFields(const std::string&, const RewriteFields&,
                                           OptimizationScope)>;
    explicit FunctionRewriter(Fn fn) : fn_(std::move(fn)) {}

    RewriteFields rewrite(const std::string& prompt, const RewriteFields& fields,
                          OptimizationScope scope) override {
        return fn_(prompt, fields, scope);
    }

private:
    Fn fn_;
};

namespace optimize_detail {

inline const char* kPromptSkeleton =
    "\n\nScope: {scope}\n\n"
    "Return all five fields. Fields outside the scope must be copied through unchanged.\n\n"
    "title: {title}\n"
    "meta_description: {meta_description}\n"
    "headings:\n{headings}\n"
    "jsonld_text: {jsonld_text}\n"
    "body:\n{body}\n";

inline std::string basic_template(const std::string& objective) {
    return "Optimize the following web document to improve its visibility in search-augmented "
           "answer engines. " +
           objective + " Keep the content faithful to the original." + kPromptSkeleton;
}

// Staged optimization prompt: entity mirroring into structural fields, fluent
// easy language everywhere, concrete front-loaded evidence in the body, and
// keyword reinforcement in the body — applied with domain and quality
// judgement rather than unconditionally.
inline std::string stage_aware_template() {
    return std::string(
               "[Task Description]\n"
               "Optimize the following document with these strategies. Keep the content faithful "
               "to the original.\n\n"
               "[Pre-Optimization Considerations]\n"
               "Before optimizing, think about two things:\n"
               "1. Domain: Consider what domain this document belongs to (e.g., medical, finance, "
               "e-commerce, technical, casual). Match the tone and vocabulary to what readers in "
               "that domain expect.\n"
               "2. Quality: If a field is already clear, specific, and well-written, keep it "
               "as-is. Only optimize fields that genuinely benefit from it. Not every document "
               "needs heavy changes.\n\n"
               "[Optimization Strategies]\n"
               "1. Entity mirroring (structural fields):\n"
               "Incorporate key entities, numbers, and domain terms from the body into the title, "
               "meta_description, headings, and jsonld_text. Add a keyword-rich summary sentence "
               "while keeping compact. Skip if the structural fields already contain the right "
               "keywords.\n\n"
               "2. Fluent, easy language (all text):\n"
               "Rewrite sentences to be smooth, clear, and easy to read. Use simple words and "
               "short sentences. Avoid jargon when a plain alternative exists. If the writing is "
               "already clear and fluent, leave it unchanged.\n\n"
               "3. Concrete evidence (body text):\n"
               "Make claims specific. Bring front the main claim to the very start of the body. "
               "Each claim should be self-contained \xE2\x80\x94 a reader should understand it "
               "without reading surrounding text. If claims are already specific, do not rephrase "
               "them.\n\n"
               "4. Keyword reinforcement (body text):\n"
               "Naturally repeat the document's core topic terms and key phrases throughout the "
               "body. Use the main subject name instead of pronouns where it reads naturally. "
               "This keeps every paragraph clearly connected to the topic.\n") +
           kPromptSkeleton;
}

}  // namespace optimize_detail

// Built-in strategy catalog: eight single-objective rewrites, their
// combination, a staged strategy, an identity no-op for harness self-tests,
// and a rules-driven slot that stays disabled until rules are supplied.
class StrategyRegistry {
public:
    static StrategyRegistry with_defaults() {
        using optimize_detail::basic_template;
        StrategyRegistry reg;
        reg.add({"authoritative",
                 basic_template("Rewrite the text in a confident, persuasive tone, making "
                                "statements definitive while keeping every fact accurate."),
                 "persuasive, definitive style"});
        reg.add({"cite-sources",
                 basic_template("Add inline citations to credible external sources, inserting "
                                "brief references that enhance reliability and trustworthiness."),
                 "inline external references"});
        reg.add({"fluency",
                 basic_template("Improve grammatical correctness by refining sentence structure "
                                "and transitions without altering the meaning of the content."),
                 "grammar and flow"});
        reg.add({"quotation",
                 basic_template("Incorporate quotations from authoritative figures or sources, "
                                "with proper attribution, to provide external validation."),
                 "attributed quotations"});
        reg.add({"easy-language",
                 basic_template("Simplify the text by replacing complex vocabulary with "
                                "accessible alternatives while preserving all information."),
                 "plain vocabulary"});
        reg.add({"statistics",
                 basic_template("Add quantitative data and numerical facts inline within "
                                "sentences to make claims more concrete and credible."),
                 "numbers and data"});
        reg.add({"technical-terms",
                 basic_template("Introduce domain-specific terminology so the content reads as "
                                "more expert and authoritative."),
                 "expert terminology"});
        reg.add({"unique-words",
                 basic_template("Enrich the vocabulary by incorporating less common words to "
                                "signal higher content quality and specialization."),
                 "distinctive vocabulary"});
        reg.add({"all-in-one",
                 basic_template("Apply all of these together: a confident persuasive tone, inline "
                                "citations to credible sources, fluent grammar, attributed "
                                "quotations, accessible vocabulary, quantitative facts, "
                                "domain terminology, and distinctive word choice. Then enhance "
                                "the text structure by bolding key features (plain asterisks) and "
                                "improving the layout for accessibility and visual appeal."),
                 "all eight objectives plus layout"});
        reg.add({"stage-aware", optimize_detail::stage_aware_template(),
                 "staged: structural mirroring, fluency, evidence, keywords"});
        reg.add({"identity",
                 "Return every field exactly as provided, without any change." +
                     std::string(optimize_detail::kPromptSkeleton),
                 "no-op for harness self-tests"});
        return reg;
    }

    void add(StrategySpec spec) { strategies_[spec.name] = std::move(spec); }

    // Rules-driven rewriting needs caller-supplied preference rules; the
    // strategy is unavailable until they are provided.
    void set_autogeo_rules(const std::string& rules) {
        if (normalize_text(rules).empty()) throw Error("autogeo rules must be non-empty");
        add({"autogeo",
             "Rewrite the following web document according to these preference rules, keeping "
             "the content faithful to the original.\n\n[Preference Rules]\n" +
                 rules + std::string(optimize_detail::kPromptSkeleton),
             "user-supplied preference rules"});
    }

    bool has(const std::string& name) const { return strategies_.count(name) != 0; }

    const StrategySpec& get(const std::string& name) const {
        auto it = strategies_.find(name);
        if (it == strategies_.end()) {
            if (name == "autogeo") {
                throw Error("strategy autogeo is disabled: supply preference rules first");
            }
            throw Error("unknown strategy: " + name);
        }
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(strategies_.size());
        for (const auto& [name, spec] : strategies_) out.push_back(name);
        return out;
    }

private:
    std::map<std::string, StrategySpec> strategies_;
};

inline std::string render_prompt(const StrategySpec& strategy, const DocumentContent& doc,
                                 OptimizationScope scope) {
    const RewriteFields fields = fields_of(doc);
    const std::pair<std::string, const std::string*> subs[] = {
        {"{title}", &fields.title},
        {"{meta_description}", &fields.meta_description},
        {"{headings}", &fields.headings},
        {"{jsonld_text}", &fields.jsonld_text},
        {"{body}", &fields.body},
    };
    std::string scope_text = scope_directive(scope);
    std::string out = strategy.prompt_template;
    auto replace_all = [&out](const std::string& key, const std::string& value) {
        size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    };
    replace_all("{scope}", scope_text);
    for (const auto& [key, value] : subs) replace_all(key, *value);
    return out;
}

struct ScopedResult {
    DocumentContent document;
    bool violation = false;
};

// Projects a rewritten candidate onto the scope: out-of-scope fields are
// restored from the original, and any attempt to change them is flagged.
inline ScopedResult enforce_scope(const DocumentContent& original, DocumentContent candidate,
                                  OptimizationScope scope) {
    if (original.doc_id != candidate.doc_id) {
        throw Error("enforce_scope doc_id mismatch: " + candidate.doc_id, "optimization");
    }
    ScopedResult result;
    candidate.url = original.url;
    if (scope != OptimizationScope::Both) {
        const bool body_in_scope = scope == OptimizationScope::BodyOnly;
        if (body_in_scope) {
            if (candidate.structural != original.structural) result.violation = true;
            candidate.structural = original.structural;
        } else {
            if (candidate.body != original.body) result.violation = true;
            candidate.body = original.body;
        }
    }
    result.document = std::move(candidate);
    return result;
}

struct ApplyResult {
    DocumentContent document;
    bool scope_violation = false;
};

// Renders the strategy prompt, runs the rewriting backend, normalizes and
// reparses the returned fields, and projects the result onto the scope.
// Only in-scope fields are normalized: out-of-scope fields reach enforce_scope
// exactly as the backend returned them, so cleanup of a faithfully echoed
// field can never read as a scope violation.
inline ApplyResult apply_strategy(const DocumentContent& doc, const StrategySpec& strategy,
                                  OptimizationScope scope, DocumentRewriter& rewriter) {
    const std::string prompt = render_prompt(strategy, doc, scope);
    RewriteFields rewritten = rewriter.rewrite(prompt, fields_of(doc), scope);
    const bool structural_in_scope = scope != OptimizationScope::BodyOnly;
    const bool body_in_scope = scope != OptimizationScope::StructuralOnly;
    auto accept = [](bool in_scope, std::string&& value) {
        return in_scope ? normalize_text(value) : std::move(value);
    };
    DocumentContent candidate;
    candidate.doc_id = doc.doc_id;
    candidate.url = doc.url;
    candidate.structural.title = accept(structural_in_scope, std::move(rewritten.title));
    candidate.structural.meta_description =
        accept(structural_in_scope, std::move(rewritten.meta_description));
    candidate.structural.headings = parse_headings(rewritten.headings);
    candidate.structural.jsonld_text =
        accept(structural_in_scope, std::move(rewritten.jsonld_text));
    candidate.body = accept(body_in_scope, std::move(rewritten.body));
    ScopedResult scoped = enforce_scope(doc, std::move(candidate), scope);
    return {std::move(scoped.document), scoped.violation};
}

}  // namespace stagevis

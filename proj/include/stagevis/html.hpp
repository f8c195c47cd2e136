#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stagevis/error.hpp"
#include "stagevis/text.hpp"
#include "stagevis/webdoc.hpp"

namespace stagevis {
namespace html_detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
    }
    return out;
}

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

// Minimal entity table; unknown entities are left verbatim.
inline bool named_entity(std::string_view name, int32_t& cp) {
    if (name == "amp") cp = '&';
    else if (name == "lt") cp = '<';
    else if (name == "gt") cp = '>';
    else if (name == "quot") cp = '"';
    else if (name == "apos") cp = '\'';
    else if (name == "nbsp") cp = 0x00A0;
    else if (name == "mdash") cp = 0x2014;
    else if (name == "ndash") cp = 0x2013;
    else if (name == "hellip") cp = 0x2026;
    else if (name == "copy") cp = 0x00A9;
    else if (name == "reg") cp = 0x00AE;
    else if (name == "trade") cp = 0x2122;
    else if (name == "rsquo") cp = 0x2019;
    else if (name == "lsquo") cp = 0x2018;
    else if (name == "rdquo") cp = 0x201D;
    else if (name == "ldquo") cp = 0x201C;
    else return false;
    return true;
}

inline std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        std::string_view name = s.substr(i + 1, semi - i - 1);
        int32_t cp = -1;
        if (!name.empty() && name[0] == '#') {
            std::string_view digits = name.substr(1);
            int base = 10;
            if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                base = 16;
                digits = digits.substr(1);
            }
            int32_t value = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                int d;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
                else { ok = false; break; }
                value = value * base + d;
                if (value > 0x10FFFF) { ok = false; break; }
            }
            if (ok && value > 0 && !(value >= 0xD800 && value <= 0xDFFF)) cp = value;
        } else {
            int32_t named;
            if (named_entity(name, named)) cp = named;
        }
        if (cp >= 0) {
            utf8_append(out, cp);
            i = semi + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

inline bool is_void_element(std::string_view tag) {
    static const char* kVoid[] = {"area", "base", "br",    "col",  "embed", "hr",   "img", "input",
                                  "link", "meta", "param", "source", "track", "wbr"};
    return std::find(std::begin(kVoid), std::end(kVoid), tag) != std::end(kVoid);
}

inline bool is_block_element(std::string_view tag) {
    static const char* kBlock[] = {
        "address", "article", "aside",  "blockquote", "body",   "br",     "caption", "dd",
        "details", "dialog",  "div",    "dl",         "dt",     "fieldset", "figcaption", "figure",
        "footer",  "form",    "h1",     "h2",         "h3",     "h4",     "h5",      "h6",
        "header",  "hr",      "html",   "li",         "main",   "nav",    "ol",      "p",
        "pre",     "section", "summary", "table",     "tbody",  "td",     "tfoot",   "th",
        "thead",   "tr",      "ul"};
    return std::find(std::begin(kBlock), std::end(kBlock), tag) != std::end(kBlock);
}

// Tags that may appear inside <head>; any other open tag implies the head has
// ended even when </head> is missing.
inline bool is_head_content(std::string_view tag) {
    static const char* kHead[] = {"base", "head", "link", "meta", "noscript", "script", "style", "template", "title"};
    return std::find(std::begin(kHead), std::end(kHead), tag) != std::end(kHead);
}

struct Attribute {
    std::string name;   // lowercased
    std::string value;  // entity-decoded
};

struct Tag {
    std::string name;  // lowercased
    bool closing = false;
    bool self_closing = false;
    std::vector<Attribute> attributes;

    const std::string* attr(std::string_view name_) const {
        for (const auto& a : attributes) {
            if (a.name == name_) return &a.value;
        }
        return nullptr;
    }
};

// Tolerant single-pass extractor. Never fails on malformed markup; the only
// rejected input is a byte stream that does not decode as UTF-8.
class Extractor {
public:
    explicit Extractor(std::string_view raw) : raw_(raw) {}

    DocumentContent run(std::string doc_id) {
        if (!is_valid_utf8(raw_)) throw Error("document bytes are not valid UTF-8");
        while (pos_ < raw_.size()) step();
        finish_heading();

        DocumentContent doc;
        doc.doc_id = std::move(doc_id);
        doc.structural.title = normalize_text(title_);
        doc.structural.meta_description = normalize_text(meta_description_);
        doc.structural.headings = std::move(headings_);
        doc.structural.jsonld_text = flatten_jsonld(jsonld_blocks_);
        doc.body = normalize_text(body_);
        return doc;
    }

private:
    void step() {
        size_t lt = raw_.find('<', pos_);
        if (lt == std::string_view::npos) {
            emit_text(raw_.substr(pos_));
            pos_ = raw_.size();
            return;
        }
        if (lt > pos_) emit_text(raw_.substr(pos_, lt - pos_));
        pos_ = lt;

        if (starts_with("<!--")) {
            size_t end = raw_.find("-->", pos_ + 4);
            pos_ = end == std::string_view::npos ? raw_.size() : end + 3;
            return;
        }
        if (starts_with("<![CDATA[")) {
            size_t end = raw_.find("]]>", pos_ + 9);
            size_t stop = end == std::string_view::npos ? raw_.size() : end;
            emit_text(raw_.substr(pos_ + 9, stop - pos_ - 9));
            pos_ = end == std::string_view::npos ? raw_.size() : end + 3;
            return;
        }
        if (starts_with("<!") || starts_with("<?")) {
            size_t end = raw_.find('>', pos_ + 2);
            pos_ = end == std::string_view::npos ? raw_.size() : end + 1;
            return;
        }
        if (pos_ + 1 < raw_.size() && (is_alpha(raw_[pos_ + 1]) || raw_[pos_ + 1] == '/')) {
            Tag tag;
            if (parse_tag(tag)) {
                handle_tag(tag);
                return;
            }
        }
        // A bare '<' that does not open a tag stays literal text.
        emit_text("<");
        pos_ += 1;
    }

    bool starts_with(std::string_view prefix) const {
        return raw_.substr(pos_, prefix.size()) == prefix;
    }

    bool parse_tag(Tag& tag) {
        size_t i = pos_ + 1;
        if (i < raw_.size() && raw_[i] == '/') {
            tag.closing = true;
            ++i;
        }
        size_t name_start = i;
        while (i < raw_.size() && (is_alpha(raw_[i]) || (raw_[i] >= '0' && raw_[i] <= '9') || raw_[i] == '-')) ++i;
        if (i == name_start) return false;
        tag.name = ascii_lower(raw_.substr(name_start, i - name_start));

        while (i < raw_.size() && raw_[i] != '>') {
            while (i < raw_.size() && is_ws(raw_[i])) ++i;
            if (i >= raw_.size() || raw_[i] == '>') break;
            if (raw_[i] == '/') {
                tag.self_closing = true;
                ++i;
                continue;
            }
            size_t attr_start = i;
            while (i < raw_.size() && !is_ws(raw_[i]) && raw_[i] != '=' && raw_[i] != '>' && raw_[i] != '/') ++i;
            if (i == attr_start) { ++i; continue; }
            Attribute attr;
            attr.name = ascii_lower(raw_.substr(attr_start, i - attr_start));
            while (i < raw_.size() && is_ws(raw_[i])) ++i;
            if (i < raw_.size() && raw_[i] == '=') {
                ++i;
                while (i < raw_.size() && is_ws(raw_[i])) ++i;
                if (i < raw_.size() && (raw_[i] == '"' || raw_[i] == '\'')) {
                    char quote = raw_[i++];
                    size_t value_start = i;
                    while (i < raw_.size() && raw_[i] != quote) ++i;
                    attr.value = decode_entities(raw_.substr(value_start, i - value_start));
                    if (i < raw_.size()) ++i;
                } else {
                    size_t value_start = i;
                    while (i < raw_.size() && !is_ws(raw_[i]) && raw_[i] != '>') ++i;
                    attr.value = decode_entities(raw_.substr(value_start, i - value_start));
                }
            }
            tag.attributes.push_back(std::move(attr));
        }
        if (i >= raw_.size()) {
            pos_ = raw_.size();  // unterminated tag at EOF: drop it
            return true;
        }
        pos_ = i + 1;
        return true;
    }

    void handle_tag(const Tag& tag) {
        const std::string& name = tag.name;

        if (!tag.closing && head_depth_ > 0 && !is_head_content(name)) head_depth_ = 0;

        if (!tag.closing && (name == "script" || name == "style")) {
            consume_raw_text(name, tag);
            return;
        }
        if (!tag.closing && name == "title") {
            std::string content = consume_rcdata("title");
            if (!seen_title_) {
                title_ = decode_entities(content);
                seen_title_ = true;
            }
            return;
        }
        if (!tag.closing && name == "textarea") {
            std::string content = consume_rcdata("textarea");
            emit_text_decoded(decode_entities(content));
            return;
        }
        if (name == "meta" && !tag.closing) {
            const std::string* meta_name = tag.attr("name");
            if (!seen_meta_description_ && meta_name && ascii_lower(*meta_name) == "description") {
                if (const std::string* content = tag.attr("content")) {
                    meta_description_ = *content;
                    seen_meta_description_ = true;
                }
            }
            return;
        }

        if (name == "head") adjust_depth(head_depth_, tag);
        if (name == "nav") adjust_depth(nav_depth_, tag);
        if (name == "footer") adjust_depth(footer_depth_, tag);

        const bool is_heading_tag =
            name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6';
        if (is_heading_tag) {
            finish_heading();
            if (!tag.closing && !tag.self_closing && !suppressed()) {
                heading_level_ = name[1] - '0';
                in_heading_ = true;
            }
        } else if (is_block_element(name)) {
            finish_heading();  // an unclosed heading ends at the next block
        }

        if (is_block_element(name)) body_.push_back('\n');
    }

    void adjust_depth(int& depth, const Tag& tag) {
        if (tag.closing) {
            if (depth > 0) --depth;
        } else if (!tag.self_closing) {
            ++depth;
        }
    }

    bool suppressed() const { return head_depth_ > 0 || nav_depth_ > 0 || footer_depth_ > 0; }

    void emit_text(std::string_view run) { emit_text_decoded(decode_entities(run)); }

    void emit_text_decoded(const std::string& text) {
        if (suppressed()) return;
        if (in_heading_) heading_text_ += text;
        body_ += text;
    }

    void finish_heading() {
        if (!in_heading_) return;
        in_heading_ = false;
        std::string text = normalize_text(heading_text_);
        heading_text_.clear();
        if (!text.empty()) headings_.push_back({heading_level_, std::move(text)});
    }

    // Raw-text elements: content runs to the matching close tag, no nesting.
    void consume_raw_text(const std::string& name, const Tag& open_tag) {
        std::string content = scan_to_close(name);
        if (name == "script") {
            const std::string* type = open_tag.attr("type");
            if (type) {
                std::string t = ascii_lower(*type);
                size_t semi = t.find(';');
                if (semi != std::string::npos) t = t.substr(0, semi);
                while (!t.empty() && is_ws(t.back())) t.pop_back();
                if (t == "application/ld+json") {
                    auto block = nlohmann::ordered_json::parse(content, nullptr, false);
                    if (!block.is_discarded()) jsonld_blocks_.push_back(std::move(block));
                }
            }
        }
    }

    std::string consume_rcdata(const std::string& name) { return scan_to_close(name); }

    std::string scan_to_close(const std::string& name) {
        std::string close = "</" + name;
        size_t i = pos_;
        for (;;) {
            size_t lt = raw_.find('<', i);
            if (lt == std::string_view::npos) {
                std::string content(raw_.substr(pos_));
                pos_ = raw_.size();
                return content;
            }
            size_t after = lt + close.size();
            bool matches = ascii_lower(raw_.substr(lt, close.size())) == close &&
                           (after >= raw_.size() || raw_[after] == '>' || raw_[after] == '/' || is_ws(raw_[after]));
            if (matches) {
                std::string content(raw_.substr(pos_, lt - pos_));
                size_t gt = raw_.find('>', lt);
                pos_ = gt == std::string_view::npos ? raw_.size() : gt + 1;
                return content;
            }
            i = lt + 1;
        }
    }

    std::string_view raw_;
    size_t pos_ = 0;

    std::string title_;
    bool seen_title_ = false;
    std::string meta_description_;
    bool seen_meta_description_ = false;
    std::vector<Heading> headings_;
    std::vector<nlohmann::ordered_json> jsonld_blocks_;
    std::string body_;

    int head_depth_ = 0;
    int nav_depth_ = 0;
    int footer_depth_ = 0;
    bool in_heading_ = false;
    int heading_level_ = 1;
    std::string heading_text_;
};

}  // namespace html_detail

// Parses raw HTML into structural fields plus visible body text. Total on any
// valid UTF-8 input; script, style, nav, footer, head and comment subtrees are
// excluded from the body.
inline DocumentContent parse_html(std::string_view raw, std::string doc_id) {
    html_detail::Extractor extractor(raw);
    return extractor.run(std::move(doc_id));
}

}  // namespace stagevis

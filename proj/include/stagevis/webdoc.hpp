#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stagevis/error.hpp"
#include "stagevis/text.hpp"

namespace stagevis {

struct Heading {
    int level = 1;  // 1..6
    std::string text;

    bool operator==(const Heading&) const = default;
};

// The non-body fields of a web page. Every field may be empty; all text is in
// the canonical form produced by normalize_text.
struct StructuralInfo {
    std::string title;
    std::string meta_description;
    std::vector<Heading> headings;
    std::string jsonld_text;

    bool operator==(const StructuralInfo&) const = default;
};

struct DocumentContent {
    std::string doc_id;
    std::string url;
    StructuralInfo structural;
    std::string body;  // plain text, no markup

    bool operator==(const DocumentContent&) const = default;
};

// One line per heading: "H<level> <text>". Inverse of parse_headings on its
// output language.
inline std::string serialize_headings(const std::vector<Heading>& headings) {
    std::string out;
    for (size_t i = 0; i < headings.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out.push_back('H');
        out.push_back(static_cast<char>('0' + headings[i].level));
        out.push_back(' ');
        out += headings[i].text;
    }
    return out;
}

// Parses the serialize_headings format. Lines that do not match the grammar
// become level-2 headings so that rewritten heading text always stays usable.
inline std::vector<Heading> parse_headings(std::string_view text) {
    std::vector<Heading> out;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
        if (!line.empty()) {
            if (line.size() >= 3 && line[0] == 'H' && line[1] >= '1' && line[1] <= '6' && line[2] == ' ') {
                out.push_back({line[1] - '0', normalize_text(line.substr(3))});
            } else {
                std::string repaired = normalize_text(line);
                if (!repaired.empty()) out.push_back({2, std::move(repaired)});
            }
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

namespace detail {

inline void flatten_jsonld_node(const nlohmann::ordered_json& node, std::string& out) {
    auto emit = [&out](std::string_view piece) {
        if (piece.empty()) return;
        if (!out.empty()) out.push_back(' ');
        out += piece;
    };
    switch (node.type()) {
        case nlohmann::ordered_json::value_t::object:
            for (const auto& [key, value] : node.items()) {
                emit(key);
                flatten_jsonld_node(value, out);
            }
            break;
        case nlohmann::ordered_json::value_t::array:
            for (const auto& value : node) flatten_jsonld_node(value, out);
            break;
        case nlohmann::ordered_json::value_t::string:
            emit(node.get<std::string>());
            break;
        case nlohmann::ordered_json::value_t::number_integer:
        case nlohmann::ordered_json::value_t::number_unsigned:
        case nlohmann::ordered_json::value_t::number_float:
            emit(node.dump());
            break;
        default:
            break;  // booleans and nulls carry no indexable text
    }
}

}  // namespace detail

// Depth-first concatenation of key names and string/number leaf values,
// space-separated, in document order with key order as written.
inline std::string flatten_jsonld(const std::vector<nlohmann::ordered_json>& blocks) {
    std::string out;
    for (const auto& block : blocks) detail::flatten_jsonld_node(block, out);
    return normalize_text(out);
}

}  // namespace stagevis

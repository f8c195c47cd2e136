#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stagevis/error.hpp"
#include "stagevis/generate.hpp"
#include "stagevis/optimize.hpp"
#include "stagevis/rerank.hpp"

namespace stagevis {

// Shared plumbing for the three service clients: endpoint split, retry with
// exponential backoff, and bearer credentials taken from the environment only
// (never from flags, so tokens cannot leak into shell history or manifests).
struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/score
    int timeout_ms = 30000;
    int retries = 2;
    int backoff_ms = 250;
    std::string token_env = "STAGEVIS_API_TOKEN";
};

namespace http_detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // /score
};

inline SplitUrl split_url(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error("endpoint missing scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

inline nlohmann::ordered_json post_json(const HttpBackendConfig& config,
                                        const nlohmann::ordered_json& request,
                                        const std::string& stage) {
    const SplitUrl url = split_url(config.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::milliseconds(config.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(config.timeout_ms));
    httplib::Headers headers;
    if (const char* token = std::getenv(config.token_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const std::string body = request.dump();
    std::string last_error;
    int backoff = config.backoff_ms;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto result = client.Post(url.path, headers, body, "application/json");
        if (!result) {
            last_error = "connection error " + httplib::to_string(result.error());
            continue;
        }
        if (result->status != 200) {
            last_error = "status " + std::to_string(result->status);
            continue;
        }
        auto parsed = nlohmann::ordered_json::parse(result->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "unparseable response body";
            continue;
        }
        return parsed;
    }
    throw Error("service at " + config.endpoint + " failed after " +
                    std::to_string(config.retries + 1) + " attempts: " + last_error,
                stage);
}

}  // namespace http_detail

// Scoring service client. Request: {query, passages: [{id, text}]}.
// Response: {scores: [{id, score}]}; every requested id must come back.
class HttpScorer final : public PassageScorer {
public:
    explicit HttpScorer(HttpBackendConfig config) : config_(std::move(config)) {}

    std::vector<double> score(const std::string& query,
                              const std::vector<RerankCandidate>& batch) override {
        nlohmann::ordered_json passages = nlohmann::ordered_json::array();
        for (const auto& c : batch) passages.push_back({{"id", c.passage_id}, {"text", c.text}});
        nlohmann::ordered_json request{{"query", query}, {"passages", std::move(passages)}};
        nlohmann::ordered_json response = http_detail::post_json(config_, request, "reranking");
        std::map<std::string, double> by_id;
        if (!response.contains("scores") || !response.at("scores").is_array()) {
            throw Error("scoring response missing scores array", "reranking");
        }
        for (const auto& entry : response.at("scores")) {
            by_id[entry.at("id").get<std::string>()] = entry.at("score").get<double>();
        }
        std::vector<double> scores;
        scores.reserve(batch.size());
        for (const auto& c : batch) {
            auto it = by_id.find(c.passage_id);
            if (it == by_id.end()) {
                throw Error("scoring response missing id " + c.passage_id, "reranking");
            }
            scores.push_back(it->second);
        }
        return scores;
    }

private:
    HttpBackendConfig config_;
};

inline constexpr const char* kGeneratorInstructions =
    "Answer the query using only the numbered sources. After each claim drawn from a source, "
    "append that source's bracketed number, e.g. [2]. For every citation, also return the exact "
    "sentence you relied on in a quotes object keyed by source number.";

// Generation service client. Request: {query, candidates: [{index, title,
// meta_description, headings, passage}], instructions}. Response: {text}
// plus an optional {quotes: {\"n\": quote}} used for provenance.
class HttpGenerator final : public GeneratorBackend {
public:
    explicit HttpGenerator(HttpBackendConfig config) : config_(std::move(config)) {}

    GeneratorOutput generate(const GenerationContext& context) override {
        nlohmann::ordered_json candidates = nlohmann::ordered_json::array();
        for (size_t i = 0; i < context.candidates.size(); ++i) {
            const ContextCandidate& c = context.candidates[i];
            nlohmann::ordered_json entry{{"index", i + 1},
                                         {"title", c.title},
                                         {"meta_description", c.meta_description},
                                         {"headings", c.headings},
                                         {"passage", c.text}};
            if (context.include_jsonld) entry["jsonld_text"] = c.jsonld_text;
            candidates.push_back(std::move(entry));
        }
        nlohmann::ordered_json request{{"query", context.query},
                                       {"candidates", std::move(candidates)},
                                       {"instructions", kGeneratorInstructions}};
        nlohmann::ordered_json response = http_detail::post_json(config_, request, "generation");
        if (!response.contains("text") || !response.at("text").is_string()) {
            throw Error("generation response missing text", "generation");
        }
        GeneratorOutput output;
        output.text = response.at("text").get<std::string>();
        if (response.contains("quotes") && response.at("quotes").is_object()) {
            for (const auto& [key, value] : response.at("quotes").items()) {
                char* end = nullptr;
                long index = std::strtol(key.c_str(), &end, 10);
                if (end && *end == '\0' && index >= 1 && value.is_string()) {
                    output.quotes[static_cast<int>(index)] = value.get<std::string>();
                }
            }
        }
        return output;
    }

private:
    HttpBackendConfig config_;
};

// Rewriting service client. Request: {prompt, fields: {title,
// meta_description, headings, jsonld_text, body}, scope}. Response: {fields:
// same shape}; missing fields are an error (scope enforcement happens after).
class HttpRewriter final : public DocumentRewriter {
public:
    explicit HttpRewriter(HttpBackendConfig config) : config_(std::move(config)) {}

    RewriteFields rewrite(const std::string& prompt, const RewriteFields& fields,
                          OptimizationScope scope) override {
        nlohmann::ordered_json request{{"prompt", prompt},
                                       {"fields",
                                        {{"title", fields.title},
                                         {"meta_description", fields.meta_description},
                                         {"headings", fields.headings},
                                         {"jsonld_text", fields.jsonld_text},
                                         {"body", fields.body}}},
                                       {"scope", scope_name(scope)}};
        nlohmann::ordered_json response = http_detail::post_json(config_, request, "optimization");
        if (!response.contains("fields") || !response.at("fields").is_object()) {
            throw Error("rewriting response missing fields", "optimization");
        }
        const auto& out = response.at("fields");
        for (const char* key : {"title", "meta_description", "headings", "jsonld_text", "body"}) {
            if (!out.contains(key) || !out.at(key).is_string()) {
                throw Error(std::string("rewriting response missing field ") + key, "optimization");
            }
        }
        return {out.at("title").get<std::string>(), out.at("meta_description").get<std::string>(),
                out.at("headings").get<std::string>(), out.at("jsonld_text").get<std::string>(),
                out.at("body").get<std::string>()};
    }

private:
    HttpBackendConfig config_;
};

}  // namespace stagevis

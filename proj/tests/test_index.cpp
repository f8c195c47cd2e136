#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "stagevis/corpus.hpp"
#include "stagevis/index.hpp"

using namespace stagevis;
using Catch::Matchers::WithinAbs;

namespace {

// Three passage-only units; expected scores computed independently from the
// Okapi formula (k1=1.2, b=0.75, idf = ln(1+(N-df+0.5)/(df+0.5))) and frozen.
std::vector<SemanticUnit> passage_units(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::vector<SemanticUnit> units;
    for (const auto& [id, text] : rows) {
        SemanticUnit u;
        u.passage_id = id;
        u.elements = {{"title", ""},
                      {"meta_description", ""},
                      {"headings", ""},
                      {"jsonld_text", ""},
                      {"passage", text}};
        units.push_back(std::move(u));
    }
    return units;
}

const std::vector<std::pair<std::string, std::string>> kMiniRows = {
    {"a:0", "vitamin d helps calcium absorption"},
    {"b:0", "vitamin c boosts immunity and vitamin d synthesis"},
    {"c:0", "calcium rich foods support bone health"},
};

std::map<std::string, std::string> unit_docs(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::map<std::string, std::string> m;
    for (const auto& [id, text] : rows) m[id] = id.substr(0, id.find(':'));
    return m;
}

DocumentContent simple_doc(const std::string& id, const std::string& title,
                           const std::string& meta, const std::string& heading,
                           const std::string& jsonld, const std::string& body) {
    DocumentContent doc;
    doc.doc_id = id;
    doc.url = "https://example.org/" + id;
    doc.structural.title = title;
    doc.structural.meta_description = meta;
    if (!heading.empty()) doc.structural.headings.push_back({1, heading});
    doc.structural.jsonld_text = jsonld;
    doc.body = body;
    return doc;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("stagevis-index-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("bm25 matches hand-computed scores on the three-passage fixture") {
    auto set = FieldIndexSet::build(passage_units(kMiniRows), unit_docs(kMiniRows));
    auto ranked = set.field_rank(FieldId::Passage, "vitamin d");

    // c:0 contains neither query term, so it is excluded rather than kept at 0.
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].passage_id == "a:0");
    CHECK(ranked[1].passage_id == "b:0");
    CHECK_THAT(ranked[0].score, WithinAbs(1.028594329972343, 1e-9));
    CHECK_THAT(ranked[1].score, WithinAbs(1.0260427380590298, 1e-9));
    CHECK(ranked[0].doc_id == "a");
}

TEST_CASE("bm25 agrees with a brute-force reimplementation") {
    auto set = FieldIndexSet::build(passage_units(kMiniRows), unit_docs(kMiniRows));

    std::map<std::string, std::vector<std::string>> units;
    for (const auto& [id, text] : kMiniRows) units[id] = index_tokens(text);

    for (const std::string query :
         {"vitamin d", "calcium", "bone health foods", "synthesis", "vitamin", "absent terms"}) {
        auto got = set.field_rank(FieldId::Passage, query);
        auto want = oracle::bm25_rank(units, index_tokens(query));
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].passage_id == want[i].id);
            CHECK_THAT(got[i].score, WithinAbs(want[i].score, 1e-12));
        }
    }
}

TEST_CASE("idf stays positive even when a term is in every unit") {
    CHECK_THAT(index_detail::idf(3, 3), WithinAbs(std::log(1.0 + 0.5 / 3.5), 1e-15));
    CHECK(index_detail::idf(3, 3) > 0.0);
    CHECK(index_detail::idf(1, 1) > 0.0);
    // fixture check: "vitamin" sits in 2 of 3 units, same idf as "calcium"
    CHECK_THAT(index_detail::idf(3, 2), WithinAbs(0.47000362924573563, 1e-15));
}

TEST_CASE("repeated query terms contribute once per occurrence") {
    auto set = FieldIndexSet::build(passage_units(kMiniRows), unit_docs(kMiniRows));
    auto once = set.field_rank(FieldId::Passage, "vitamin");
    auto twice = set.field_rank(FieldId::Passage, "vitamin vitamin");
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(twice[i].passage_id == once[i].passage_id);
        CHECK_THAT(twice[i].score, WithinAbs(2.0 * once[i].score, 1e-12));
    }
}

TEST_CASE("score ties are broken by ascending passage id") {
    const std::vector<std::pair<std::string, std::string>> rows = {
        {"zzz:0", "calcium rich foods support bone health"},
        {"aaa:0", "calcium rich foods support bone health"},
        {"mmm:0", "unrelated text about nothing"},
    };
    auto set = FieldIndexSet::build(passage_units(rows), unit_docs(rows));
    auto ranked = set.field_rank(FieldId::Passage, "calcium");
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].passage_id == "aaa:0");
    CHECK(ranked[1].passage_id == "zzz:0");
    CHECK(ranked[0].score == ranked[1].score);
}

TEST_CASE("units with an empty field are absent from that field's index") {
    auto snapshot = CorpusSnapshot::ingest({
        simple_doc("with-title", "calcium guide", "", "", "", "plain words"),
        simple_doc("no-title", "", "calcium summary", "", "", "calcium in the body text"),
    });
    auto set = FieldIndexSet::build(snapshot);

    auto title_ranked = set.field_rank(FieldId::Title, "calcium");
    REQUIRE(title_ranked.size() == 1);
    CHECK(title_ranked[0].doc_id == "with-title");

    auto heading_ranked = set.field_rank(FieldId::Headings, "calcium");
    CHECK(heading_ranked.empty());

    auto meta_ranked = set.field_rank(FieldId::MetaDescription, "calcium");
    REQUIRE(meta_ranked.size() == 1);
    CHECK(meta_ranked[0].doc_id == "no-title");
}

TEST_CASE("fusion of a unit ranked first in all five fields is 5/61") {
    auto snapshot = CorpusSnapshot::ingest({
        simple_doc("solo", "alpha beta", "alpha gamma", "alpha heading", "alpha delta",
                   "alpha epsilon body"),
    });
    auto set = FieldIndexSet::build(snapshot);
    auto fused = set.retrieve("alpha", 10);
    REQUIRE(fused.size() == 1);
    CHECK(fused[0].passage_id == "solo:0");
    CHECK_THAT(fused[0].score, WithinAbs(5.0 / 61.0, 1e-12));
}

TEST_CASE("fusion of a body-only match is 1/61") {
    auto snapshot = CorpusSnapshot::ingest({
        simple_doc("solo", "title words", "meta words", "heading words", "jsonld words",
                   "omega appears only here"),
    });
    auto set = FieldIndexSet::build(snapshot);
    auto fused = set.retrieve("omega", 10);
    REQUIRE(fused.size() == 1);
    CHECK_THAT(fused[0].score, WithinAbs(1.0 / 61.0, 1e-12));
}

TEST_CASE("fused retrieval matches the brute-force oracle on the fixture corpus") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    REQUIRE(docs.size() == 6);
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));
    auto set = FieldIndexSet::build(snapshot);

    for (const std::string query :
         {"vitamin d dosage for adults", "calcium rich foods", "bone density exercise",
          "sunlight skin synthesis", "buy vitamin d3 supplements 1000 iu", "immune system",
          "deficiency symptoms winter"}) {
        auto got = set.retrieve(query, 100);
        auto want = oracle::rrf_rank(snapshot, query);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) {
            INFO("query `" << query << "` position " << i);
            CHECK(got[i].passage_id == want[i].id);
            CHECK_THAT(got[i].score, WithinAbs(want[i].score, 1e-12));
        }
    }
}

TEST_CASE("multi-passage documents map each passage back to their doc id") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));
    REQUIRE(snapshot.semantic_units("vitd-dosage").size() == 3);

    auto set = FieldIndexSet::build(snapshot);
    auto fused = set.retrieve("vitamin d dosage", 100);
    int seen = 0;
    for (const auto& entry : fused) {
        if (entry.doc_id == "vitd-dosage") {
            ++seen;
            CHECK(entry.passage_id.rfind("vitd-dosage:", 0) == 0);
        }
    }
    CHECK(seen == 3);
}

TEST_CASE("a zero field weight removes that field from fusion") {
    auto snapshot = CorpusSnapshot::ingest({
        simple_doc("solo", "title words", "meta words", "heading words", "jsonld words",
                   "omega appears only here"),
    });
    FieldIndexSet::Options options;
    options.field_weights[static_cast<int>(FieldId::Passage)] = 0.0;
    auto set = FieldIndexSet::build(snapshot, options);
    CHECK(set.retrieve("omega", 10).empty());
    REQUIRE(set.retrieve("title", 10).size() == 1);
}

TEST_CASE("field weights scale fused contributions linearly") {
    auto snapshot = CorpusSnapshot::ingest({
        simple_doc("solo", "omega in the title", "meta words", "heading words", "jsonld words",
                   "body words"),
    });
    auto plain = FieldIndexSet::build(snapshot).retrieve("omega", 10);

    FieldIndexSet::Options doubled;
    doubled.field_weights[static_cast<int>(FieldId::Title)] = 2.0;
    auto scaled = FieldIndexSet::build(snapshot, doubled).retrieve("omega", 10);

    REQUIRE(plain.size() == 1);
    REQUIRE(scaled.size() == 1);
    CHECK_THAT(scaled[0].score, WithinAbs(2.0 * plain[0].score, 1e-12));
}

TEST_CASE("larger kappa damps every fused score") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));

    FieldIndexSet::Options soft;
    soft.rrf_kappa = 600.0;
    auto base = FieldIndexSet::build(snapshot).retrieve("vitamin d dosage", 100);
    auto damped = FieldIndexSet::build(snapshot, soft).retrieve("vitamin d dosage", 100);
    REQUIRE(base.size() == damped.size());
    std::map<std::string, double> damped_scores;
    for (const auto& e : damped) damped_scores[e.passage_id] = e.score;
    for (const auto& e : base) {
        REQUIRE(damped_scores.count(e.passage_id) == 1);
        CHECK(damped_scores[e.passage_id] < e.score);
    }
}

TEST_CASE("top_k truncation keeps the leading prefix") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));
    auto set = FieldIndexSet::build(snapshot);

    auto full = set.retrieve("vitamin d dosage", 100);
    auto top2 = set.retrieve("vitamin d dosage", 2);
    REQUIRE(full.size() > 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].passage_id == full[0].passage_id);
    CHECK(top2[1].passage_id == full[1].passage_id);
}

TEST_CASE("queries with no matching terms retrieve nothing") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));
    auto set = FieldIndexSet::build(snapshot);
    CHECK(set.retrieve("zzyzx qwxv", 100).empty());
    CHECK(set.retrieve("", 100).empty());
}

TEST_CASE("an index survives a save/load round trip") {
    auto docs = CorpusSnapshot::read_corpus_file(std::string(FIXTURE_DIR) + "/rrf_corpus.jsonl");
    auto snapshot = CorpusSnapshot::ingest(std::move(docs));
    FieldIndexSet::Options options;
    options.field_weights[static_cast<int>(FieldId::Title)] = 1.5;
    options.rrf_kappa = 42.0;
    auto set = FieldIndexSet::build(snapshot, options);

    auto dir = fresh_dir("roundtrip");
    set.save(dir / "index.json");
    auto loaded = FieldIndexSet::load(dir / "index.json");

    CHECK(loaded.snapshot_id() == snapshot.snapshot_id());
    CHECK(loaded.unit_count() == set.unit_count());
    CHECK(loaded.options().rrf_kappa == 42.0);

    for (const std::string query : {"vitamin d dosage for adults", "calcium", "bone density"}) {
        auto a = set.retrieve(query, 100);
        auto b = loaded.retrieve(query, 100);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].passage_id == b[i].passage_id);
            CHECK(a[i].doc_id == b[i].doc_id);
            CHECK(a[i].score == b[i].score);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("loading a damaged index file fails loudly") {
    auto dir = fresh_dir("damaged");
    write_file_atomic(dir / "index.json", "{\"format\":\"something-else\"}");
    CHECK_THROWS_AS(FieldIndexSet::load(dir / "index.json"), Error);
    CHECK_THROWS_AS(FieldIndexSet::load(dir / "missing.json"), Error);
    std::filesystem::remove_all(dir);
}

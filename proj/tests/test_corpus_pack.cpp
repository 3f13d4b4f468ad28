#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lime/corpus.hpp"

using namespace lime;

namespace {

std::filesystem::path write_lines(const std::string& name, const std::vector<std::string>& lines) {
    const auto path = limetest::temp_path(name);
    std::ofstream out(path);
    for (const auto& l : lines) {
        out << l << "\n";
    }
    return path;
}

EncodedDocument doc(std::vector<uint32_t> ids, Annotation a, Annotation b) {
    EncodedDocument d;
    d.token_ids = std::move(ids);
    d.domain_classes = {std::move(a), std::move(b)};
    return d;
}

}  // namespace

TEST_CASE("load_documents reads one document per plain line") {
    const auto path = write_lines("plain.txt", {"first doc", "second doc", "third"});
    const auto docs = load_documents(path, CorpusFormat::plain_lines);
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].text == "first doc");
    CHECK(docs[2].text == "third");
    CHECK(docs[0].id != docs[1].id);
    std::filesystem::remove(path);
}

TEST_CASE("load_documents parses json lines and reports malformed records by line") {
    const auto path = write_lines("docs.jsonl", {R"({"text": "alpha"})", R"({"text": "beta"})"});
    const auto docs = load_documents(path, CorpusFormat::json_lines);
    REQUIRE(docs.size() == 2);
    CHECK(docs[1].text == "beta");
    std::filesystem::remove(path);

    const auto bad = write_lines("bad.jsonl", {R"({"text": "ok"})", "not json at all"});
    try {
        load_documents(bad, CorpusFormat::json_lines);
        FAIL("malformed record should be fatal");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    const auto skipped = load_documents(bad, CorpusFormat::json_lines, true);
    CHECK(skipped.size() == 1);
    std::filesystem::remove(bad);
}

TEST_CASE("split_corpus produces disjoint deterministic halves of the requested size") {
    std::vector<Document> docs;
    for (uint64_t i = 0; i < 100; ++i) {
        docs.push_back({i, "doc " + std::to_string(i)});
    }
    const auto split = split_corpus(docs, 0.2, 5);
    CHECK(split.test.size() == 20);
    CHECK(split.train.size() == 80);
    CHECK(!split.empty_test_warning);

    std::set<uint64_t> seen;
    for (const auto& d : split.train) {
        seen.insert(d.id);
    }
    for (const auto& d : split.test) {
        CHECK(seen.count(d.id) == 0);
        seen.insert(d.id);
    }
    CHECK(seen.size() == 100);

    const auto again = split_corpus(docs, 0.2, 5);
    CHECK(again.test.size() == split.test.size());
    for (size_t i = 0; i < again.test.size(); ++i) {
        CHECK(again.test[i].id == split.test[i].id);
    }

    CHECK_THROWS_AS(split_corpus(docs, 0.0, 5), Error);
    CHECK_THROWS_AS(split_corpus(docs, 1.0, 5), Error);

    // a fraction that rounds to zero held-out documents is flagged
    const std::vector<Document> few(docs.begin(), docs.begin() + 10);
    const auto none = split_corpus(few, 0.02, 5);
    CHECK(none.test.empty());
    CHECK(none.train.size() == 10);
    CHECK(none.empty_test_warning);
}

TEST_CASE("pack_sequences inserts separators and chunks non-overlapping windows") {
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    std::vector<EncodedDocument> docs;
    docs.push_back(doc({10, 11, 12}, {1, 2, 3}, {0, 1, 0}));
    docs.push_back(doc({20, 21}, {2, 2}, {1, 1}));

    // stream: 10 11 12 <sep> 20 21 <sep>; one window of 4 fits
    const auto batches = pack_sequences(docs, {da, db}, 3, 1, ShiftMode::none);
    REQUIRE(batches.size() == 1);
    const auto& b0 = batches[0];
    CHECK(b0.batch == 1);
    CHECK(b0.seq_len == 3);
    CHECK(b0.inputs == std::vector<uint32_t>{10, 11, 12});
    CHECK(b0.targets == std::vector<uint32_t>{11, 12, 0});
    REQUIRE(b0.classes.size() == 2);
    CHECK(b0.classes[0] == std::vector<uint16_t>{1, 2, 3});
    CHECK(b0.classes[1] == std::vector<uint16_t>{0, 1, 0});
}

TEST_CASE("pack_sequences look-ahead shift crosses document boundaries before chunking") {
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    std::vector<EncodedDocument> docs;
    docs.push_back(doc({10, 11, 12}, {1, 2, 3}, {0, 1, 0}));
    docs.push_back(doc({20, 21}, {2, 2}, {1, 1}));

    // shifted class stream (a): 2 3 SPECIAL 2 2 SPECIAL x
    const auto batches = pack_sequences(docs, {da, db}, 3, 1, ShiftMode::lookahead);
    REQUIRE(batches.size() == 1);
    const auto& b0 = batches[0];
    CHECK(b0.inputs == std::vector<uint32_t>{10, 11, 12});
    CHECK(b0.classes[0] == std::vector<uint16_t>{2, 3, da.special_class});
    CHECK(b0.classes[1] == std::vector<uint16_t>{1, 0, db.special_class});
}

TEST_CASE("pack_sequences fills batches in stream order and drops partial remainders") {
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    std::vector<EncodedDocument> docs;
    docs.push_back(doc({10, 11, 12}, {1, 2, 3}, {0, 1, 0}));
    docs.push_back(doc({20, 21}, {2, 2}, {1, 1}));

    // stream of 7 tokens, windows of 3: [10 11 12] [<sep> 20 21]; 7th dropped
    const auto batches = pack_sequences(docs, {da, db}, 2, 2, ShiftMode::none);
    REQUIRE(batches.size() == 1);
    const auto& b0 = batches[0];
    CHECK(b0.batch == 2);
    CHECK(b0.inputs == std::vector<uint32_t>{10, 11, 0, 20});
    CHECK(b0.targets == std::vector<uint32_t>{11, 12, 20, 21});
    CHECK(b0.classes[0] == std::vector<uint16_t>{1, 2, da.special_class, 2});

    // same stream, batch of 3 windows: only 2 windows exist, so nothing ships
    const auto none = pack_sequences(docs, {da, db}, 2, 3, ShiftMode::none);
    CHECK(none.empty());
}

TEST_CASE("to_model_input preserves the packed batch layout") {
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    std::vector<EncodedDocument> docs;
    docs.push_back(doc({10, 11, 12, 13, 14}, {1, 2, 3, 0, 1}, {0, 1, 0, 1, 0}));
    const auto batches = pack_sequences(docs, {da, db}, 2, 2, ShiftMode::none);
    REQUIRE(!batches.empty());
    const auto in = to_model_input(batches[0]);
    CHECK(in.batch == 2);
    CHECK(in.seq == 2);
    CHECK(in.tokens == batches[0].inputs);
    CHECK(in.targets == batches[0].targets);
    CHECK(in.classes == batches[0].classes);
    CHECK(in.positions() == 4);
}

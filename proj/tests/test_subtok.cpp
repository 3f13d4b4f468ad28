#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lime/annotate.hpp"
#include "lime/corpus.hpp"
#include "lime/lingtok.hpp"
#include "lime/subtok.hpp"

using namespace lime;

namespace {

std::vector<Document> make_corpus(const std::vector<std::string>& lines) {
    std::vector<Document> docs;
    for (size_t i = 0; i < lines.size(); ++i) {
        docs.push_back({i, lines[i]});
    }
    return docs;
}

std::vector<Document> repetitive_corpus() {
    std::vector<std::string> lines;
    for (int i = 0; i < 200; ++i) {
        lines.push_back("the bobcat sees the rooms and the bobcat waits");
        lines.push_back("a small room holds 123 boxes and 456 crates");
        lines.push_back("don't stop and don't wait, we'll see");
    }
    return make_corpus(lines);
}

// Deterministic single-class annotator for alignment tests.
class FixedAnnotator : public Annotator {
public:
    FixedAnnotator(DomainSchema schema, uint16_t cls) : schema_(std::move(schema)), cls_(cls) {}
    Annotation annotate(std::string_view, const std::vector<LinguisticToken>& toks) const override {
        Annotation ann(toks.size());
        for (size_t i = 0; i < ann.size(); ++i) {
            ann[i] = static_cast<uint16_t>((cls_ + i) % schema_.size());
        }
        return ann;
    }
    const DomainSchema& schema() const override { return schema_; }

private:
    DomainSchema schema_;
    uint16_t cls_;
};

}  // namespace

TEST_CASE("render_linguistic turns leading spaces into markers and escapes marker bytes") {
    const std::string text = "x word";
    const auto toks = pretokenize(text);
    REQUIRE(toks.size() == 2);
    CHECK(render_linguistic(text, toks[0]) == "x");
    CHECK(render_linguistic(text, toks[1]) == std::string(SubwordVocab::kWsMarker) + "word");

    const std::string two = "a  b";
    const auto toks2 = pretokenize(two);
    CHECK(render_linguistic(two, toks2[1]) ==
          std::string(SubwordVocab::kWsMarker) + SubwordVocab::kWsMarker + "b");

    // literal marker and escape characters in source text stay decodable
    const std::string lit = std::string("q") + SubwordVocab::kWsMarker + " " +
                            SubwordVocab::kEscapeChar;
    const auto tl = pretokenize(lit);
    std::string joined;
    for (const auto& t : tl) {
        joined += render_linguistic(lit, t);
    }
    CHECK(joined.find(std::string(SubwordVocab::kEscapeChar) + "1") != std::string::npos);
    CHECK(joined.find(std::string(SubwordVocab::kEscapeChar) + "2") != std::string::npos);
}

TEST_CASE("bpe training produces the documented id layout and is deterministic") {
    const auto corpus = repetitive_corpus();
    const auto vocab = train_bpe(corpus, 300);
    CHECK(vocab.size() == 300);
    CHECK(vocab.pieces[SubwordVocab::kSeparatorId].empty() == false);
    for (uint32_t b = 0; b < 256; ++b) {
        REQUIRE(vocab.pieces[1 + b].size() == 1);
        CHECK(static_cast<uint8_t>(vocab.pieces[1 + b][0]) == b);
    }
    CHECK(vocab.merges.size() == 300 - SubwordVocab::kBaseAlphabet);

    const auto again = train_bpe(corpus, 300);
    CHECK(again.pieces == vocab.pieces);
    CHECK(again.merges == vocab.merges);
    CHECK(again.fingerprint() == vocab.fingerprint());
}

TEST_CASE("bpe vocabulary round-trips through disk with a stable fingerprint") {
    const auto vocab = train_bpe(repetitive_corpus(), 320);
    const auto path = limetest::temp_path("vocab.bin");
    vocab.save(path);
    const auto back = SubwordVocab::load(path);
    CHECK(back.pieces == vocab.pieces);
    CHECK(back.merges == vocab.merges);
    CHECK(back.fingerprint() == vocab.fingerprint());
    std::filesystem::remove(path);

    auto mutated = vocab;
    mutated.pieces.back() += "z";
    CHECK(mutated.fingerprint() != vocab.fingerprint());
}

TEST_CASE("no merged piece starts with the whitespace marker followed by a digit") {
    // " 123" and " 456" are frequent enough that only the ban explains their absence
    const auto vocab = train_bpe(repetitive_corpus(), 600);
    const std::string marker = SubwordVocab::kWsMarker;
    bool saw_marker_digit = false;
    bool saw_marker_letter = false;
    for (uint32_t id = SubwordVocab::kBaseAlphabet; id < vocab.size(); ++id) {
        const auto& piece = vocab.pieces[id];
        if (piece.size() > marker.size() && piece.compare(0, marker.size(), marker) == 0) {
            const char next = piece[marker.size()];
            if (next >= '0' && next <= '9') {
                saw_marker_digit = true;
            }
            if ((next >= 'a' && next <= 'z') || (next >= 'A' && next <= 'Z')) {
                saw_marker_letter = true;
            }
        }
    }
    CHECK(!saw_marker_digit);
    CHECK(saw_marker_letter);  // the ban is digit-specific, words still absorb the marker
}

TEST_CASE("encode and decode invert each other on arbitrary byte strings") {
    const auto vocab = train_bpe(repetitive_corpus(), 400);
    const Encoder enc(vocab);
    std::mt19937_64 rng(4242);
    std::vector<std::string> cases = {
        "",
        "the bobcat sees",
        "don't",
        " leading and trailing ",
        std::string("literal ") + SubwordVocab::kWsMarker + " marker",
        std::string("esc") + SubwordVocab::kEscapeChar + "2",
        "caf\xC3\xA9 \xFF\xFE raw",
    };
    for (int i = 0; i < 200; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 40);
        for (int j = 0; j < n; ++j) {
            s.push_back(static_cast<char>(rng() % 256));
        }
        cases.push_back(s);
    }
    for (const auto& text : cases) {
        const auto toks = pretokenize(text);
        const auto ids = enc.encode_text_linguistic(text, toks, nullptr);
        CHECK(decode(ids, vocab) == text);
    }
}

TEST_CASE("encoding never crosses linguistic token boundaries") {
    const auto corpus = repetitive_corpus();
    const auto vocab = train_bpe(corpus, 500);
    const Encoder enc(vocab);
    const std::string text = "the bobcat sees the rooms";
    const auto toks = pretokenize(text);
    std::vector<uint32_t> counts;
    const auto ids = enc.encode_text_linguistic(text, toks, &counts);
    REQUIRE(counts.size() == toks.size());

    // concatenating the per-token independent encodings gives the same ids
    std::vector<uint32_t> independent;
    for (const auto& t : toks) {
        const auto& piece_ids = enc.encode_rendered(render_linguistic(text, t));
        independent.insert(independent.end(), piece_ids.begin(), piece_ids.end());
    }
    CHECK(ids == independent);

    size_t total = 0;
    for (const auto c : counts) {
        total += c;
    }
    CHECK(total == ids.size());
}

TEST_CASE("align_annotations repeats each token class over its subword pieces") {
    const std::vector<Annotation> domains = {{7, 3}, {1, 2}};
    const std::vector<uint32_t> counts = {1, 3};
    const auto aligned = align_annotations(domains, counts);
    REQUIRE(aligned.size() == 2);
    CHECK(aligned[0] == Annotation{7, 3, 3, 3});
    CHECK(aligned[1] == Annotation{1, 2, 2, 2});
}

TEST_CASE("lime_tokenize attaches one class per domain to every piece") {
    const auto vocab = train_bpe(repetitive_corpus(), 300);
    const Encoder enc(vocab);
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    const FixedAnnotator ann_a(da, 0);
    const FixedAnnotator ann_b(db, 1);
    const std::string text = "the bobcat waits";
    const auto toks = pretokenize(text);

    const auto out = lime_tokenize(text, enc, {&ann_a, &ann_b});
    REQUIRE(!out.empty());
    std::vector<uint32_t> counts;
    const auto ids = enc.encode_text_linguistic(text, toks, &counts);
    REQUIRE(out.size() == ids.size());

    size_t piece = 0;
    const auto ga = ann_a.annotate(text, toks);
    const auto gb = ann_b.annotate(text, toks);
    for (size_t t = 0; t < toks.size(); ++t) {
        for (uint32_t j = 0; j < counts[t]; ++j, ++piece) {
            CHECK(out[piece].token_id == ids[piece]);
            REQUIRE(out[piece].class_ids.size() == 2);
            CHECK(out[piece].class_ids[0] == ga[t]);
            CHECK(out[piece].class_ids[1] == gb[t]);
        }
    }
}

TEST_CASE("lta files round-trip documents with their class sequences") {
    const auto vocab = train_bpe(repetitive_corpus(), 300);
    const Encoder enc(vocab);
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    const FixedAnnotator ann_a(da, 2);
    const FixedAnnotator ann_b(db, 0);

    std::vector<EncodedDocument> docs;
    const std::vector<std::string> texts = {"the bobcat sees", "don't wait", "456 crates"};
    for (size_t i = 0; i < texts.size(); ++i) {
        const auto toks = pretokenize(texts[i]);
        EncodedDocument d;
        d.source_id = i * 11;
        std::vector<uint32_t> counts;
        d.token_ids = enc.encode_text_linguistic(texts[i], toks, &counts);
        d.domain_classes = align_annotations(
            {ann_a.annotate(texts[i], toks), ann_b.annotate(texts[i], toks)}, counts);
        docs.push_back(std::move(d));
    }

    const auto path = limetest::temp_path("docs.lta");
    write_lta(path, docs, vocab.size(), {da, db});
    const auto back = read_lta(path);
    CHECK(back.vocab_size == vocab.size());
    REQUIRE(back.domain_names.size() == 2);
    CHECK(back.domain_names[0] == "a");
    CHECK(back.domain_sizes[0] == da.size());
    REQUIRE(back.docs.size() == docs.size());
    for (size_t i = 0; i < docs.size(); ++i) {
        CHECK(back.docs[i].source_id == docs[i].source_id);
        CHECK(back.docs[i].token_ids == docs[i].token_ids);
        CHECK(back.docs[i].domain_classes == docs[i].domain_classes);
    }
    std::filesystem::remove(path);
}

TEST_CASE("tokenization stats report inflation and contraction splits on contraction text") {
    std::vector<std::string> lines;
    for (int i = 0; i < 300; ++i) {
        lines.push_back("don't stop, we'll win, it's fine, can't lose");
        lines.push_back("the plan works and the room holds");
    }
    const auto corpus = make_corpus(lines);
    const auto vocab = train_bpe(corpus, 420);
    const auto stats = tokenization_stats(corpus, vocab, 15);

    CHECK(stats.lime_tokens >= stats.plain_tokens);
    CHECK(stats.token_inflation > 0.0);
    REQUIRE(!stats.top_split_sequences.empty());

    double percent_sum = 0.0;
    bool contraction_split = false;
    for (const auto& s : stats.top_split_sequences) {
        CHECK(s.count >= 1);
        CHECK(s.percent > 0.0);
        CHECK(s.percent <= 100.0);
        percent_sum += s.percent;
        if (s.lime.find("n't") != std::string::npos ||
            s.lime.find("'ll") != std::string::npos || s.lime.find("'s") != std::string::npos) {
            contraction_split = true;
        }
    }
    CHECK(percent_sum <= 100.0 + 1e-9);
    CHECK(contraction_split);
}

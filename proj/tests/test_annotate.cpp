#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>
#include <vector>

#include "doctest.h"
#include "lime/annotate.hpp"
#include "lime/embed.hpp"
#include "lime/lingtok.hpp"
#include "lime/schema.hpp"
#include "lime/textgen.hpp"

using namespace lime;

namespace {

uint16_t id_of(const DomainSchema& s, const char* label) {
    const int id = s.class_id(label);
    REQUIRE(id >= 0);
    return static_cast<uint16_t>(id);
}

}  // namespace

TEST_CASE("bundled schemas expose their padding and separator classes") {
    const auto pos = pos_schema();
    CHECK(pos.name == "pos");
    CHECK(pos.size() == 51);
    CHECK(pos.label(pos.x_class) == "XX");
    CHECK(pos.label(pos.special_class) == "SPECIAL");
    CHECK(pos.class_id("NN") >= 0);
    CHECK(pos.class_id("not-a-tag") == -1);

    const auto ner = ner_schema();
    CHECK(ner.name == "ner");
    CHECK(ner.size() == 20);
    CHECK(ner.label(ner.x_class) == "''");
    CHECK(ner.label(ner.special_class) == "SPECIAL");
}

TEST_CASE("shift_lookahead moves each class one step left and pads with the x class") {
    const auto pos = pos_schema();
    const Annotation ann = {id_of(pos, "DT"), id_of(pos, "NN"), id_of(pos, "NN"),
                            id_of(pos, "IN"), id_of(pos, "NNP")};
    const Annotation shifted = shift_lookahead(ann, pos);
    const Annotation expect = {id_of(pos, "NN"), id_of(pos, "NN"), id_of(pos, "IN"),
                               id_of(pos, "NNP"), pos.x_class};
    CHECK(shifted == expect);

    const Annotation twice = shift_lookahead(shifted, pos);
    const Annotation expect2 = {id_of(pos, "NN"), id_of(pos, "IN"), id_of(pos, "NNP"),
                                pos.x_class, pos.x_class};
    CHECK(twice == expect2);

    CHECK(shift_lookahead({}, pos).empty());
    CHECK(shift_lookahead({id_of(pos, "VB")}, pos) == Annotation{pos.x_class});
}

TEST_CASE("perceptron tagger learns the template distribution and round-trips through disk") {
    const auto pos = pos_schema();
    const auto ner = ner_schema();
    TextGenerator gen(pos, ner);
    Rng rng(91);
    auto sentences = gen.tagged_sentences(rng, 3000);
    REQUIRE(sentences.size() == 3000);

    const size_t held = 300;
    std::vector<TaggedSentence> train(sentences.begin(), sentences.end() - held);
    std::vector<TaggedSentence> test(sentences.end() - held, sentences.end());
    const auto tagger = train_pos_tagger(train, pos, 5, 7);
    CHECK(tagger.trained());
    CHECK(tagger.feature_count() > 100);

    size_t right = 0, total = 0;
    for (const auto& sent : test) {
        std::vector<std::string_view> surfaces;
        for (const auto& t : sent) {
            surfaces.push_back(t.surface);
        }
        const auto ann = tagger.annotate_surfaces(surfaces);
        REQUIRE(ann.size() == sent.size());
        for (size_t i = 0; i < sent.size(); ++i) {
            total++;
            right += ann[i] == sent[i].class_id;
        }
    }
    CHECK(static_cast<double>(right) / total > 0.95);

    const auto path = std::filesystem::temp_directory_path() / "lime_test_tagger.bin";
    tagger.save(path);
    const auto back = PerceptronTagger::load(path, pos);
    const std::string text = "The small bobcat sees 12 rooms.";
    const auto toks = pretokenize(text);
    CHECK(back.annotate(text, toks) == tagger.annotate(text, toks));
    std::filesystem::remove(path);
}

TEST_CASE("tagger causal annotation equals the literal prefix re-annotation") {
    const auto pos = pos_schema();
    const auto ner = ner_schema();
    TextGenerator gen(pos, ner);
    Rng rng(17);
    auto sentences = gen.tagged_sentences(rng, 400);
    const auto tagger = train_pos_tagger(sentences, pos, 3, 3);

    const std::string texts[] = {
        "A bobcat in Japan doesn't wait.",
        "We'll span 12 + 34 = 46 easily.",
        "The long-term plan sees Murphy's room.",
    };
    for (const auto& text : texts) {
        const auto toks = pretokenize(text);
        const auto fast = tagger.annotate_causal(text, toks);
        const auto literal = annotate_causal(text, toks, tagger);
        CHECK(fast == literal);
    }
}

TEST_CASE("rule annotator prefers the longest gazetteer match starting earliest") {
    const auto ner = ner_schema();
    const auto gaz = Gazetteer::from_tsv_text(
        "Japan\tGPE\nNew York\tGPE\nYork\tGPE\nMurphy\tPERSON\nNew York City\tGPE\n");
    const uint16_t gpe = id_of(ner, "GPE");
    const uint16_t person = id_of(ner, "PERSON");
    const uint16_t none = id_of(ner, "''");

    const std::string text = "Murphy saw New York City from Japan";
    const auto toks = pretokenize(text);
    const auto ann = annotate_ner(text, toks, gaz, ner);
    REQUIRE(ann.size() == 7);
    CHECK(ann[0] == person);
    CHECK(ann[1] == none);
    CHECK(ann[2] == gpe);  // New
    CHECK(ann[3] == gpe);  // York
    CHECK(ann[4] == gpe);  // City: three-token entry beats the two-token one
    CHECK(ann[5] == none);
    CHECK(ann[6] == gpe);
}

TEST_CASE("rule annotator tags digit runs, percentages, and money amounts") {
    const auto ner = ner_schema();
    const Gazetteer empty;
    const uint16_t cardinal = id_of(ner, "CARDINAL");
    const uint16_t percent = id_of(ner, "PERCENT");
    const uint16_t money = id_of(ner, "MONEY");
    const uint16_t none = id_of(ner, "''");

    const std::string text = "pay $ 5 or 15 % of 200";
    const auto toks = pretokenize(text);
    const auto ann = annotate_ner(text, toks, empty, ner);
    REQUIRE(ann.size() == 8);
    CHECK(ann[0] == none);      // pay
    CHECK(ann[1] == money);     // $
    CHECK(ann[2] == money);     // 5
    CHECK(ann[3] == none);      // or
    CHECK(ann[4] == percent);   // 15
    CHECK(ann[5] == percent);   // %
    CHECK(ann[6] == none);      // of
    CHECK(ann[7] == cardinal);  // 200, a plain digit run
}

TEST_CASE("noise injection is an identity at p = 0 and resamples at p = 1") {
    const auto pos = pos_schema();
    Annotation ann(500);
    Rng fill(5);
    for (auto& c : ann) {
        c = static_cast<uint16_t>(fill.next_below(pos.size()));
    }

    Rng r0(99);
    CHECK(inject_noise(ann, 0.0, pos, r0) == ann);

    Rng r1(99);
    const auto noisy = inject_noise(ann, 1.0, pos, r1);
    REQUIRE(noisy.size() == ann.size());
    size_t changed = 0;
    for (size_t i = 0; i < ann.size(); ++i) {
        CHECK(noisy[i] < pos.size());
        changed += noisy[i] != ann[i];
    }
    // uniform redraw keeps a position with probability 1/|C|
    CHECK(changed > ann.size() / 2);

    Rng r2(99);
    CHECK(inject_noise(ann, 1.0, pos, r2) == noisy);
}

TEST_CASE("schema text serialization round-trips labels") {
    const auto pos = pos_schema();
    const auto text = schema_to_text(pos);
    std::vector<std::string> labels;
    size_t start = 0;
    while (start < text.size()) {
        const size_t nl = text.find('\n', start);
        labels.push_back(text.substr(start, nl - start));
        start = nl == std::string::npos ? text.size() : nl + 1;
    }
    const auto back = schema_from_lines("pos", labels, "XX", "SPECIAL");
    CHECK(back.classes == pos.classes);
    CHECK(back.x_class == pos.x_class);
    CHECK(back.special_class == pos.special_class);
}

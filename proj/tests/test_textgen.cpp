#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>
#include <unordered_set>
#include <vector>

#include "doctest.h"
#include "lime/annotate.hpp"
#include "lime/schema.hpp"
#include "lime/textgen.hpp"

using namespace lime;

namespace {

struct Fixture {
    DomainSchema pos = pos_schema();
    DomainSchema ner = ner_schema();
    TextGenerator gen{pos, ner};
};

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    size_t n = 0;
    for (size_t at = haystack.find(needle); at != std::string::npos;
         at = haystack.find(needle, at + needle.size())) {
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("generation is a pure function of the random stream") {
    Fixture f;
    Rng r1(7), r2(7);
    for (int i = 0; i < 20; ++i) {
        CHECK(f.gen.document(r1) == f.gen.document(r2));
    }

    Rng s1(9), s2(9);
    const auto a = f.gen.tagged_sentences(s1, 30);
    const auto b = f.gen.tagged_sentences(s2, 30);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].size() == b[i].size());
        for (size_t j = 0; j < a[i].size(); ++j) {
            CHECK(a[i][j].surface == b[i][j].surface);
            CHECK(a[i][j].class_id == b[i][j].class_id);
        }
    }

    Rng p1(11), p2(11);
    const auto i1 = f.gen.pir_instance(p1, 40);
    const auto i2 = f.gen.pir_instance(p2, 40);
    CHECK(i1.prompt == i2.prompt);
    CHECK(i1.gold == i2.gold);
}

TEST_CASE("the document mix covers prose, arithmetic, and retrieval templates") {
    Fixture f;
    Rng rng(123);
    size_t arithmetic = 0, retrieval = 0;
    for (int i = 0; i < 300; ++i) {
        const std::string doc = f.gen.document(rng);
        REQUIRE(!doc.empty());
        if (contains(doc, "The result is: ")) {
            ++arithmetic;
        }
        if (contains(doc, "It has the following properties")) {
            ++retrieval;
        }
    }
    CHECK(arithmetic > 5);
    CHECK(retrieval > 2);
    CHECK(arithmetic + retrieval < 150);
}

TEST_CASE("emitted arithmetic lines state correct sums") {
    Fixture f;
    Rng rng(55);
    size_t complete = 0, truncated = 0;
    for (int i = 0; i < 400 && (complete < 5 || truncated < 5); ++i) {
        const std::string doc = f.gen.document(rng);
        const std::string prefix = "The result is: ";
        if (doc.rfind(prefix, 0) != 0) {
            continue;
        }
        const std::string rest = doc.substr(prefix.size());
        const size_t plus = rest.find('+');
        const size_t eq = rest.find(" = ");
        REQUIRE(plus != std::string::npos);
        REQUIRE(eq != std::string::npos);
        const int a = std::stoi(rest.substr(0, plus));
        const int b = std::stoi(rest.substr(plus + 1, eq - plus - 1));
        const std::string tail = rest.substr(eq + 3);
        if (tail.empty()) {
            ++truncated;  // cut-off line keeps its trailing space
            CHECK(doc.back() == ' ');
        } else {
            ++complete;
            CHECK(std::stoi(tail) == a + b);
        }
        CHECK(a >= 5);
        CHECK(a <= 49);
        CHECK(b >= 5);
        CHECK(b <= 49);
    }
    CHECK(complete >= 3);
    CHECK(truncated >= 3);
}

TEST_CASE("the arithmetic prompt has a fixed byte-exact shape") {
    CHECK(TextGenerator::arithmetic_prompt(12, 34) == "The result is: 12+34 = ");
    CHECK(TextGenerator::arithmetic_prompt(5, 49) == "The result is: 5+49 = ");
}

TEST_CASE("retrieval instances carry the gold property inside the prompt") {
    Fixture f;
    Rng rng(31);
    for (const int noise : {0, 30, 120}) {
        const auto inst = f.gen.pir_instance(rng, noise);
        REQUIRE(!inst.gold.empty());
        CHECK(inst.prompt.back() == ':');
        CHECK(contains(inst.prompt, inst.gold));
        CHECK(contains(inst.prompt, " is in the "));
        CHECK(count_occurrences(inst.prompt, "It has the following properties") == 2);
        for (const char c : inst.gold) {
            CHECK(c >= 'a');
            CHECK(c <= 'z');
        }
    }

    Rng ra(77), rb(77);
    const auto small = f.gen.pir_instance(ra, 0);
    const auto large = f.gen.pir_instance(rb, 150);
    CHECK(large.prompt.size() > small.prompt.size());

    // the document form appends the answer after the final cue
    Rng rd(88);
    const std::string doc = f.gen.pir_document(rd, 25);
    CHECK(doc.back() == '.');
    CHECK(count_occurrences(doc, "It has the following properties") == 2);
}

TEST_CASE("the gazetteer covers every name the sentence templates can emit") {
    Fixture f;
    const std::string tsv = f.gen.gazetteer_tsv();
    const Gazetteer gaz = Gazetteer::from_tsv_text(tsv);
    REQUIRE(!gaz.entries().empty());

    std::unordered_set<std::string> labels;
    std::unordered_set<std::string> covered;
    for (const auto& entry : gaz.entries()) {
        REQUIRE(!entry.surfaces.empty());
        labels.insert(entry.label);
        for (const auto& s : entry.surfaces) {
            covered.insert(s);
        }
    }
    CHECK(labels.count("PERSON") == 1);
    CHECK(labels.count("GPE") == 1);
    CHECK(labels.count("ORG") == 1);
    CHECK(labels.size() == 3);

    const int nnp = f.pos.class_id("NNP");
    REQUIRE(nnp >= 0);
    Rng rng(41);
    size_t names = 0;
    for (const auto& sent : f.gen.tagged_sentences(rng, 300)) {
        for (const auto& tok : sent) {
            if (tok.class_id == static_cast<uint16_t>(nnp)) {
                ++names;
                CHECK(covered.count(tok.surface) == 1);
            }
        }
    }
    CHECK(names > 50);
}

TEST_CASE("tagged sentences use valid classes and flag trailing whitespace") {
    Fixture f;
    const int sp = f.pos.class_id("_SP");
    REQUIRE(sp >= 0);
    Rng rng(61);
    size_t trailing = 0, tokens = 0;
    for (const auto& sent : f.gen.tagged_sentences(rng, 400)) {
        REQUIRE(!sent.empty());
        for (size_t j = 0; j < sent.size(); ++j) {
            const auto& tok = sent[j];
            CHECK(tok.class_id < f.pos.size());
            CHECK(tok.class_id != f.pos.x_class);
            CHECK(tok.class_id != f.pos.special_class);
            if (tok.surface.empty()) {
                // only the sentence-final whitespace token may be empty
                CHECK(tok.class_id == static_cast<uint16_t>(sp));
                CHECK(j == sent.size() - 1);
                ++trailing;
            }
            ++tokens;
        }
    }
    CHECK(tokens > 1000);
    CHECK(trailing > 5);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "lime/lingtok.hpp"

using namespace lime;

namespace {

std::vector<std::string> surfaces_of(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& t : pretokenize(text)) {
        out.emplace_back(t.surface(text));
    }
    return out;
}

}  // namespace

TEST_CASE("pretokenize splits on whitespace and keeps it as leading runs") {
    const std::string text = "A bobcat in Japan";
    const auto toks = pretokenize(text);
    REQUIRE(toks.size() == 4);
    CHECK(toks[0].surface(text) == "A");
    CHECK(toks[1].surface(text) == "bobcat");
    CHECK(toks[2].surface(text) == "in");
    CHECK(toks[3].surface(text) == "Japan");
    CHECK(toks[0].leading_ws(text) == "");
    CHECK(toks[1].leading_ws(text) == " ");
    CHECK(detokenize(text, toks) == text);
}

TEST_CASE("pretokenize treats contraction suffixes as single units") {
    CHECK(surfaces_of("don't") == std::vector<std::string>{"do", "n't"});
    CHECK(surfaces_of("can't") == std::vector<std::string>{"ca", "n't"});
    CHECK(surfaces_of("We'll") == std::vector<std::string>{"We", "'ll"});
    CHECK(surfaces_of("they're") == std::vector<std::string>{"they", "'re"});
    CHECK(surfaces_of("we've") == std::vector<std::string>{"we", "'ve"});
    CHECK(surfaces_of("he'd") == std::vector<std::string>{"he", "'d"});
    CHECK(surfaces_of("I'm") == std::vector<std::string>{"I", "'m"});
    CHECK(surfaces_of("Murphy's") == std::vector<std::string>{"Murphy", "'s"});
    CHECK(surfaces_of("cannot") == std::vector<std::string>{"can", "not"});
}

TEST_CASE("pretokenize splits hyphenated compounds at the hyphen") {
    CHECK(surfaces_of("long-term") == std::vector<std::string>{"long", "-", "term"});
    CHECK(surfaces_of("state-of-the-art") ==
          std::vector<std::string>{"state", "-", "of", "-", "the", "-", "art"});
}

TEST_CASE("pretokenize keeps maximal digit runs together and splits letter-digit joints") {
    CHECK(surfaces_of("under 160 pounds") == std::vector<std::string>{"under", "160", "pounds"});
    CHECK(surfaces_of("3.14") == std::vector<std::string>{"3", ".", "14"});
    CHECK(surfaces_of("x86 and B2") == std::vector<std::string>{"x", "86", "and", "B", "2"});
    CHECK(surfaces_of("12+34=46") ==
          std::vector<std::string>{"12", "+", "34", "=", "46"});
}

TEST_CASE("pretokenize emits one token per punctuation or symbol codepoint") {
    CHECK(surfaces_of("Hello!!") == std::vector<std::string>{"Hello", "!", "!"});
    CHECK(surfaces_of("($5)") == std::vector<std::string>{"(", "$", "5", ")"});
    CHECK(surfaces_of("wait...") == std::vector<std::string>{"wait", ".", ".", "."});
    CHECK(surfaces_of("a,b") == std::vector<std::string>{"a", ",", "b"});
}

TEST_CASE("pretokenize carries trailing whitespace in a final empty-surface token") {
    const std::string text = "word  \n";
    const auto toks = pretokenize(text);
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].surface(text) == "word");
    CHECK(toks[1].surface(text) == "");
    CHECK(toks[1].leading_ws(text) == "  \n");
    CHECK(detokenize(text, toks) == text);
}

TEST_CASE("pretokenize handles empty and all-whitespace inputs") {
    CHECK(pretokenize("").empty());
    const std::string ws = " \t ";
    const auto toks = pretokenize(ws);
    REQUIRE(toks.size() == 1);
    CHECK(toks[0].surface(ws) == "");
    CHECK(toks[0].leading_ws(ws) == ws);
    CHECK(detokenize(ws, toks) == ws);
}

TEST_CASE("pretokenize survives multibyte text and invalid bytes without span drift") {
    const std::string text = "caf\xC3\xA9 \xE2\x82\xAC" "5 \xFF\xFEmix";
    const auto toks = pretokenize(text);
    CHECK(detokenize(text, toks) == text);
    size_t covered = 0;
    for (const auto& t : toks) {
        covered += t.leading_ws(text).size() + t.surface(text).size();
    }
    CHECK(covered == text.size());
}

TEST_CASE("decode_utf8 reports invalid bytes as replacement with single-byte advance") {
    const std::string bad = "\xFFz";
    size_t i = 0;
    CHECK(decode_utf8(bad, i) == 0xFFFD);
    CHECK(i == 1);
    CHECK(decode_utf8(bad, i) == static_cast<uint32_t>('z'));

    const std::string trunc = "\xE2\x82";  // truncated 3-byte sequence
    i = 0;
    CHECK(decode_utf8(trunc, i) == 0xFFFD);
    CHECK(i == 1);
}

TEST_CASE("codepoint classifiers agree on representative characters") {
    CHECK(is_whitespace_cp(U' '));
    CHECK(is_whitespace_cp(U'\n'));
    CHECK(is_whitespace_cp(0x00A0));
    CHECK(!is_whitespace_cp(U'a'));
    CHECK(is_punctuation_cp(U'.'));
    CHECK(is_punctuation_cp(U'-'));
    CHECK(is_symbol_cp(U'$'));
    CHECK(is_symbol_cp(U'+'));
    CHECK(is_letter_cp(U'Q'));
    CHECK(is_letter_cp(0x00E9));  // é
    CHECK(is_digit_cp(U'7'));
    CHECK(!is_digit_cp(U'x'));
}

TEST_CASE("pretokenize and detokenize round-trip 10k random documents byte-exactly") {
    std::mt19937_64 rng(20260815);
    const std::string words[] = {"the", "Bobcat", "don't", "We'll", "long-term", "3.14",
                                 "caf\xC3\xA9", "x86", "$5", "...", "a", "I'm"};
    const std::string seps[] = {" ", "  ", "\t", "\n", " \n ", ""};
    for (int doc = 0; doc < 10000; ++doc) {
        std::string text;
        const int parts = static_cast<int>(rng() % 12);
        for (int p = 0; p < parts; ++p) {
            text += seps[rng() % 6];
            if (rng() % 8 == 0) {
                // raw byte noise, including invalid UTF-8
                const int n = 1 + static_cast<int>(rng() % 4);
                for (int i = 0; i < n; ++i) {
                    text.push_back(static_cast<char>(rng() % 256));
                }
            } else {
                text += words[rng() % 12];
            }
        }
        text += seps[rng() % 6];
        const auto toks = pretokenize(text);
        REQUIRE(detokenize(text, toks) == text);
    }
}

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lime {

// One linguistic token: a byte span of the source text plus the whitespace run
// that preceded it. Concatenating leading_ws + surface over a sequence
// reconstructs the source byte-exactly. A surface never contains whitespace;
// trailing whitespace at the end of a text is carried by one final
// empty-surface token.
struct LinguisticToken {
    uint32_t begin = 0;     // byte offset of surface start
    uint32_t end = 0;       // byte offset one past surface end
    uint32_t ws_begin = 0;  // byte offset of the preceding whitespace run

    std::string_view surface(std::string_view text) const {
        return text.substr(begin, end - begin);
    }
    std::string_view leading_ws(std::string_view text) const {
        return text.substr(ws_begin, begin - ws_begin);
    }
};

// Rule-based segmentation into minimal meaningful units:
//   - split on Unicode whitespace (kept as leading_ws of the next token);
//   - punctuation (P*) and symbols (S*) split greedily, one codepoint each;
//   - hyphen and apostrophe are boundary events, except recognized English
//     contraction suffixes (n't, 'll, 're, 've, 'd, 'm, 's) which split off
//     as a single unit: "don't" -> [do][n't]; "cannot" -> [can][not];
//   - a maximal decimal-digit run is one token; letter/digit boundaries split.
std::vector<LinguisticToken> pretokenize(std::string_view text);

// Exact inverse on pretokenize output: returns the original text.
std::string detokenize(std::string_view text, const std::vector<LinguisticToken>& tokens);

// Classification helpers shared with the annotators and the coupling report.
bool is_whitespace_cp(uint32_t cp);
bool is_punctuation_cp(uint32_t cp);
bool is_symbol_cp(uint32_t cp);
bool is_letter_cp(uint32_t cp);
bool is_digit_cp(uint32_t cp);

// Decodes one UTF-8 codepoint at byte offset i; advances i. Invalid bytes are
// consumed one at a time and reported as the replacement value 0xFFFD plus a
// length of 1 so byte spans stay exact.
uint32_t decode_utf8(std::string_view text, size_t& i);

}  // namespace lime

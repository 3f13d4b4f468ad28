#include "lime/lingtok.hpp"

#include "lime/unicode_tables.hpp"

namespace lime {

namespace {

bool in_ranges(uint32_t cp, const uni::CodepointRange* ranges, size_t n) {
    size_t lo = 0;
    size_t hi = n;
    while (lo < hi) {
        const size_t mid = (lo + hi) / 2;
        if (cp > ranges[mid].last) {
            lo = mid + 1;
        } else if (cp < ranges[mid].first) {
            hi = mid;
        } else {
            return true;
        }
    }
    return false;
}

template <size_t N>
bool in_ranges(uint32_t cp, const uni::CodepointRange (&ranges)[N]) {
    return in_ranges(cp, ranges, N);
}

enum class Cat : uint8_t { ws, digit, punctsym, letterish };

Cat classify(uint32_t cp) {
    if (cp < 128) {
        // ASCII fast path covers almost every byte of a realistic corpus.
        if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) {
            return Cat::ws;
        }
        if (cp >= '0' && cp <= '9') {
            return Cat::digit;
        }
        if ((cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
            (cp >= '{' && cp <= '~')) {
            return Cat::punctsym;
        }
        if (cp < 0x09 || (cp > 0x0D && cp < ' ') || cp == 0x7F) {
            return Cat::letterish;  // control bytes: opaque, never split
        }
        return Cat::letterish;
    }
    if (in_ranges(cp, uni::kWhitespaceRanges)) {
        return Cat::ws;
    }
    if (in_ranges(cp, uni::kDecimalDigitRanges)) {
        return Cat::digit;
    }
    if (in_ranges(cp, uni::kPunctuationRanges) || in_ranges(cp, uni::kSymbolRanges)) {
        return Cat::punctsym;
    }
    return Cat::letterish;
}

bool is_apostrophe(uint32_t cp) { return cp == 0x27 || cp == 0x2019; }

struct Segment {
    uint32_t begin;
    uint32_t end;
    uint32_t last_cp_begin;  // byte offset of the final codepoint (for n't splits)
    Cat cat;
    bool apostrophe;  // punctsym segment that is a single apostrophe
};

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool iequals_ascii(std::string_view s, std::string_view lower_ref) {
    if (s.size() != lower_ref.size()) {
        return false;
    }
    for (size_t i = 0; i < s.size(); ++i) {
        if (ascii_lower(s[i]) != lower_ref[i]) {
            return false;
        }
    }
    return true;
}

// Contraction suffixes that keep the apostrophe attached: 'll 're 've 'd 'm 's.
bool is_attached_suffix(std::string_view letters) {
    static constexpr std::string_view kSuffixes[] = {"ll", "re", "ve", "d", "m", "s"};
    for (const auto suf : kSuffixes) {
        if (iequals_ascii(letters, suf)) {
            return true;
        }
    }
    return false;
}

}  // namespace

uint32_t decode_utf8(std::string_view text, size_t& i) {
    const auto byte = [&](size_t k) { return static_cast<uint8_t>(text[k]); };
    const uint8_t b0 = byte(i);
    if (b0 < 0x80) {
        i += 1;
        return b0;
    }
    size_t len = 0;
    uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        i += 1;
        return 0xFFFD;
    }
    if (i + len > text.size()) {
        i += 1;
        return 0xFFFD;
    }
    for (size_t k = 1; k < len; ++k) {
        const uint8_t b = byte(i + k);
        if ((b & 0xC0) != 0x80) {
            i += 1;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    return cp;
}

bool is_whitespace_cp(uint32_t cp) { return classify(cp) == Cat::ws; }
bool is_punctuation_cp(uint32_t cp) { return in_ranges(cp, uni::kPunctuationRanges); }
bool is_symbol_cp(uint32_t cp) { return in_ranges(cp, uni::kSymbolRanges); }
bool is_letter_cp(uint32_t cp) { return in_ranges(cp, uni::kLetterRanges); }
bool is_digit_cp(uint32_t cp) { return cp < 128 ? (cp >= '0' && cp <= '9') : in_ranges(cp, uni::kDecimalDigitRanges); }

std::vector<LinguisticToken> pretokenize(std::string_view text) {
    std::vector<LinguisticToken> out;
    std::vector<Segment> segs;
    size_t i = 0;
    uint32_t ws_begin = 0;

    const auto flush_chunk = [&]() {
        if (segs.empty()) {
            return;
        }
        // Contraction pass over the primitive segments of one chunk.
        size_t k = 0;
        uint32_t pending_ws = ws_begin;
        const auto emit = [&](uint32_t b, uint32_t e) {
            out.push_back({b, e, pending_ws});
            pending_ws = e;
        };
        while (k < segs.size()) {
            const Segment& s = segs[k];
            if (s.cat == Cat::letterish && k + 2 < segs.size() && segs[k + 1].apostrophe &&
                segs[k + 2].cat == Cat::letterish) {
                const std::string_view tail = text.substr(segs[k + 2].begin, segs[k + 2].end - segs[k + 2].begin);
                if (is_attached_suffix(tail)) {
                    emit(s.begin, s.end);
                    emit(segs[k + 1].begin, segs[k + 2].end);
                    k += 3;
                    continue;
                }
                if (iequals_ascii(tail, "t")) {
                    const std::string_view last(text.substr(s.last_cp_begin, s.end - s.last_cp_begin));
                    if (iequals_ascii(last, "n")) {
                        if (s.last_cp_begin > s.begin) {
                            emit(s.begin, s.last_cp_begin);
                        }
                        emit(s.last_cp_begin, segs[k + 2].end);
                        k += 3;
                        continue;
                    }
                }
            }
            if (s.cat == Cat::letterish && s.end - s.begin == 6 &&
                iequals_ascii(text.substr(s.begin, 6), "cannot")) {
                emit(s.begin, s.begin + 3);
                emit(s.begin + 3, s.end);
                k += 1;
                continue;
            }
            emit(s.begin, s.end);
            k += 1;
        }
        segs.clear();
    };

    while (i < text.size()) {
        const size_t cp_begin = i;
        const uint32_t cp = decode_utf8(text, i);
        const Cat cat = classify(cp);
        if (cat == Cat::ws) {
            if (!segs.empty()) {
                flush_chunk();
                ws_begin = static_cast<uint32_t>(cp_begin);
            }
            continue;
        }
        const auto b = static_cast<uint32_t>(cp_begin);
        const auto e = static_cast<uint32_t>(i);
        if (cat == Cat::punctsym) {
            segs.push_back({b, e, b, cat, is_apostrophe(cp)});
        } else if (!segs.empty() && segs.back().cat == cat &&
                   (cat == Cat::digit || cat == Cat::letterish) && segs.back().end == b) {
            segs.back().end = e;
            segs.back().last_cp_begin = b;
        } else {
            segs.push_back({b, e, b, cat, false});
        }
    }
    flush_chunk();

    // Trailing whitespace: one empty-surface token carries it.
    const auto text_end = static_cast<uint32_t>(text.size());
    const uint32_t covered = out.empty() ? 0 : out.back().end;
    if (text_end > covered || (text_end > 0 && out.empty())) {
        out.push_back({text_end, text_end, covered});
    }
    return out;
}

std::string detokenize(std::string_view text, const std::vector<LinguisticToken>& tokens) {
    std::string result;
    result.reserve(text.size());
    for (const auto& t : tokens) {
        result.append(t.leading_ws(text));
        result.append(t.surface(text));
    }
    return result;
}

}  // namespace lime

#include "lime/subtok.hpp"

#include <algorithm>
#include <map>

#include "lime/common.hpp"
#include "lime/corpus.hpp"

namespace lime {

namespace {

constexpr std::string_view kMarker = "\xE2\x96\x81";
constexpr std::string_view kEscape = "\xE2\x96\x82";

void render_bytes(std::string_view surface, std::string& out) {
    size_t i = 0;
    while (i < surface.size()) {
        if (surface.compare(i, 3, kMarker) == 0) {
            out.append(kEscape);
            out.push_back('1');
            i += 3;
        } else if (surface.compare(i, 3, kEscape) == 0) {
            out.append(kEscape);
            out.push_back('2');
            i += 3;
        } else {
            out.push_back(surface[i]);
            i += 1;
        }
    }
}

// The rendered form of a whitespace chunk (leading whitespace plus the
// unsplit non-whitespace run): the plain-BPE baseline unit.
void render_chunks(std::string_view text, std::vector<std::string>& out) {
    size_t i = 0;
    std::string ws;
    std::string chunk;
    const auto flush = [&]() {
        if (!chunk.empty()) {
            out.push_back(ws + chunk);
            ws.clear();
            chunk.clear();
        }
    };
    while (i < text.size()) {
        const size_t begin = i;
        const uint32_t cp = decode_utf8(text, i);
        if (is_whitespace_cp(cp)) {
            flush();
            if (cp == ' ') {
                ws.append(kMarker);
            } else {
                ws.append(text.substr(begin, i - begin));
            }
        } else {
            render_bytes(text.substr(begin, i - begin), chunk);
        }
    }
    flush();
    if (!ws.empty()) {
        out.push_back(ws);
    }
}

struct PairCount {
    uint64_t count = 0;
};

using Pair = std::pair<uint32_t, uint32_t>;

// A merged piece whose bytes begin with the whitespace marker followed by a
// digit would glue numbers to their leading space. Checking the concatenation
// (rather than the left piece alone) keeps the rule airtight even if the
// marker bytes arrive split across both sides of the merge.
bool merge_attaches_digit_to_marker(const std::string& left, const std::string& right) {
    const std::string_view marker = SubwordVocab::kWsMarker;
    std::string merged = left + right;
    if (merged.size() <= marker.size()) {
        return false;
    }
    if (std::string_view(merged).substr(0, marker.size()) != marker) {
        return false;
    }
    const char c = merged[marker.size()];
    return c >= '0' && c <= '9';
}

// Core frequency-table trainer shared by both constrained and unconstrained
// modes. `words` maps a rendered byte string to its corpus frequency.
SubwordVocab train_from_words(const std::unordered_map<std::string, uint64_t>& words,
                              uint32_t target_vocab) {
    require(target_vocab >= SubwordVocab::kBaseAlphabet,
            "target_vocab is smaller than the base byte alphabet (257)");
    SubwordVocab vocab;
    vocab.pieces.reserve(target_vocab);
    vocab.pieces.push_back("<sep>");
    for (int b = 0; b < 256; ++b) {
        vocab.pieces.push_back(std::string(1, static_cast<char>(b)));
    }

    struct Word {
        std::vector<uint32_t> ids;
        uint64_t count;
    };
    std::vector<Word> table;
    table.reserve(words.size());
    for (const auto& [bytes, count] : words) {
        Word w;
        w.count = count;
        w.ids.reserve(bytes.size());
        for (const char c : bytes) {
            w.ids.push_back(static_cast<uint32_t>(static_cast<uint8_t>(c)) + 1);
        }
        table.push_back(std::move(w));
    }
    // Deterministic iteration order regardless of hash-map layout.
    std::sort(table.begin(), table.end(),
              [](const Word& a, const Word& b) { return a.ids < b.ids; });

    std::unordered_map<Pair, uint64_t, SubwordVocab::PairHash> counts;
    while (vocab.pieces.size() < target_vocab) {
        counts.clear();
        for (const auto& w : table) {
            for (size_t i = 0; i + 1 < w.ids.size(); ++i) {
                counts[{w.ids[i], w.ids[i + 1]}] += w.count;
            }
        }
        Pair best{0, 0};
        uint64_t best_count = 0;
        for (const auto& [pair, count] : counts) {
            if (merge_attaches_digit_to_marker(vocab.pieces[pair.first], vocab.pieces[pair.second])) {
                continue;  // numbers keep their standalone "▁" prefix
            }
            if (count < best_count) {
                continue;
            }
            if (count > best_count) {
                best = pair;
                best_count = count;
                continue;
            }
            const auto& bl = vocab.pieces[best.first];
            const auto& bp = vocab.pieces[pair.first];
            if (bp < bl || (bp == bl && vocab.pieces[pair.second] < vocab.pieces[best.second])) {
                best = pair;
            }
        }
        if (best_count == 0) {
            break;  // nothing left to merge
        }
        const uint32_t new_id = static_cast<uint32_t>(vocab.pieces.size());
        vocab.pieces.push_back(vocab.pieces[best.first] + vocab.pieces[best.second]);
        vocab.merges.push_back(best);
        for (auto& w : table) {
            size_t write = 0;
            for (size_t read = 0; read < w.ids.size(); ++read) {
                if (read + 1 < w.ids.size() && w.ids[read] == best.first && w.ids[read + 1] == best.second) {
                    w.ids[write++] = new_id;
                    ++read;
                } else {
                    w.ids[write++] = w.ids[read];
                }
            }
            w.ids.resize(write);
        }
    }
    return vocab;
}

std::unordered_map<std::string, uint64_t> count_linguistic_renderings(const std::vector<Document>& corpus) {
    std::unordered_map<std::string, uint64_t> words;
    std::string rendered;
    for (const auto& doc : corpus) {
        const auto tokens = pretokenize(doc.text);
        for (const auto& t : tokens) {
            rendered = render_linguistic(doc.text, t);
            if (!rendered.empty()) {
                ++words[rendered];
            }
        }
    }
    return words;
}

std::unordered_map<std::string, uint64_t> count_chunk_renderings(const std::vector<Document>& corpus) {
    std::unordered_map<std::string, uint64_t> words;
    std::vector<std::string> chunks;
    for (const auto& doc : corpus) {
        chunks.clear();
        render_chunks(doc.text, chunks);
        for (const auto& c : chunks) {
            ++words[c];
        }
    }
    return words;
}

}  // namespace

std::string render_linguistic(std::string_view text, const LinguisticToken& token) {
    std::string out;
    const std::string_view ws = token.leading_ws(text);
    size_t i = 0;
    while (i < ws.size()) {
        const size_t begin = i;
        const uint32_t cp = decode_utf8(ws, i);
        if (cp == ' ') {
            out.append(kMarker);
        } else {
            out.append(ws.substr(begin, i - begin));
        }
    }
    render_bytes(token.surface(text), out);
    return out;
}

SubwordVocab train_bpe(const std::vector<Document>& corpus, uint32_t target_vocab) {
    return train_from_words(count_linguistic_renderings(corpus), target_vocab);
}

SubwordVocab train_bpe_unconstrained(const std::vector<Document>& corpus, uint32_t target_vocab) {
    return train_from_words(count_chunk_renderings(corpus), target_vocab);
}

SubwordVocab::MergeRanks SubwordVocab::merge_ranks() const {
    MergeRanks ranks;
    ranks.reserve(merges.size());
    for (uint32_t r = 0; r < merges.size(); ++r) {
        ranks.emplace(merges[r], r);
    }
    return ranks;
}

uint64_t SubwordVocab::fingerprint() const {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& piece : pieces) {
        const uint32_t len = static_cast<uint32_t>(piece.size());
        h = fnv1a64(&len, 4, h);
        h = fnv1a64(piece.data(), piece.size(), h);
    }
    for (const auto& [l, r] : merges) {
        h = fnv1a64(&l, 4, h);
        h = fnv1a64(&r, 4, h);
    }
    return h;
}

namespace {

std::vector<uint32_t> encode_rendered_bytes(std::string_view rendered,
                                            const SubwordVocab::MergeRanks& ranks) {
    std::vector<uint32_t> ids;
    ids.reserve(rendered.size());
    for (const char c : rendered) {
        ids.push_back(static_cast<uint32_t>(static_cast<uint8_t>(c)) + 1);
    }
    // Repeatedly apply the earliest-trained merge present anywhere in the
    // token, leftmost occurrence first.
    while (ids.size() > 1) {
        uint32_t best_rank = UINT32_MAX;
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < ids.size(); ++i) {
            const auto it = ranks.find({ids[i], ids[i + 1]});
            if (it != ranks.end() && it->second < best_rank) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank == UINT32_MAX) {
            break;
        }
        ids[best_pos] = SubwordVocab::kBaseAlphabet + best_rank;
        ids.erase(ids.begin() + static_cast<long>(best_pos) + 1);
    }
    return ids;
}

}  // namespace

std::vector<uint32_t> encode_linguistic(std::string_view text, const LinguisticToken& token,
                                        const SubwordVocab& vocab,
                                        const SubwordVocab::MergeRanks& ranks) {
    (void)vocab;
    return encode_rendered_bytes(render_linguistic(text, token), ranks);
}

const std::vector<uint32_t>& Encoder::encode_rendered(const std::string& rendered) const {
    const auto it = cache_.find(rendered);
    if (it != cache_.end()) {
        return it->second;
    }
    return cache_.emplace(rendered, encode_rendered_bytes(rendered, ranks_)).first->second;
}

std::vector<uint32_t> Encoder::encode_text_linguistic(std::string_view text,
                                                      const std::vector<LinguisticToken>& tokens,
                                                      std::vector<uint32_t>* piece_counts) const {
    std::vector<uint32_t> out;
    if (piece_counts) {
        piece_counts->clear();
        piece_counts->reserve(tokens.size());
    }
    std::string rendered;
    for (const auto& t : tokens) {
        rendered = render_linguistic(text, t);
        if (rendered.empty()) {
            if (piece_counts) {
                piece_counts->push_back(0);
            }
            continue;
        }
        const auto& ids = encode_rendered(rendered);
        out.insert(out.end(), ids.begin(), ids.end());
        if (piece_counts) {
            piece_counts->push_back(static_cast<uint32_t>(ids.size()));
        }
    }
    return out;
}

std::vector<uint32_t> Encoder::encode_text_plain(std::string_view text) const {
    std::vector<std::string> chunks;
    render_chunks(text, chunks);
    std::vector<uint32_t> out;
    for (const auto& c : chunks) {
        const auto& ids = encode_rendered(c);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::string decode(const std::vector<uint32_t>& ids, const SubwordVocab& vocab) {
    std::string bytes;
    for (const uint32_t id : ids) {
        require(id < vocab.pieces.size(), "decode: token id out of range");
        if (id == SubwordVocab::kSeparatorId) {
            continue;
        }
        bytes += vocab.pieces[id];
    }
    std::string out;
    out.reserve(bytes.size());
    size_t i = 0;
    while (i < bytes.size()) {
        if (bytes.compare(i, 3, kMarker) == 0) {
            out.push_back(' ');
            i += 3;
        } else if (bytes.compare(i, 3, kEscape) == 0 && i + 3 < bytes.size()) {
            out.append(bytes[i + 3] == '1' ? kMarker : kEscape);
            i += 4;
        } else {
            out.push_back(bytes[i]);
            i += 1;
        }
    }
    return out;
}

std::vector<Annotation> align_annotations(const std::vector<Annotation>& domain_annotations,
                                          const std::vector<uint32_t>& piece_counts) {
    std::vector<Annotation> aligned(domain_annotations.size());
    for (size_t d = 0; d < domain_annotations.size(); ++d) {
        const Annotation& ann = domain_annotations[d];
        require(ann.size() == piece_counts.size(), "align_annotations: length mismatch");
        Annotation& out = aligned[d];
        for (size_t k = 0; k < ann.size(); ++k) {
            for (uint32_t r = 0; r < piece_counts[k]; ++r) {
                out.push_back(ann[k]);
            }
        }
    }
    return aligned;
}

std::vector<AnnotatedToken> lime_tokenize(std::string_view text, const Encoder& encoder,
                                          const std::vector<const Annotator*>& annotators) {
    const auto tokens = pretokenize(text);
    std::vector<Annotation> domain_annotations;
    domain_annotations.reserve(annotators.size());
    for (const auto* a : annotators) {
        domain_annotations.push_back(a->annotate(text, tokens));
    }
    std::vector<uint32_t> piece_counts;
    const auto ids = encoder.encode_text_linguistic(text, tokens, &piece_counts);
    const auto aligned = align_annotations(domain_annotations, piece_counts);
    std::vector<AnnotatedToken> out(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        out[i].token_id = ids[i];
        out[i].class_ids.resize(annotators.size());
        for (size_t d = 0; d < annotators.size(); ++d) {
            out[i].class_ids[d] = aligned[d][i];
        }
    }
    return out;
}

TokenizationStats tokenization_stats(const std::vector<Document>& corpus, const SubwordVocab& vocab,
                                     size_t top_k) {
    require(!corpus.empty(), "tokenization_stats: empty corpus");
    const SubwordVocab plain_vocab = train_bpe_unconstrained(corpus, vocab.size());
    const Encoder lime_enc(vocab);
    const Encoder plain_enc(plain_vocab);

    TokenizationStats stats;
    std::vector<bool> lime_used(vocab.size(), false);
    std::vector<bool> plain_used(plain_vocab.size(), false);
    std::map<std::pair<std::string, std::string>, uint64_t> regions;
    uint64_t region_total = 0;

    std::vector<std::string> chunks;
    std::string lime_rendered;
    for (const auto& doc : corpus) {
        const auto tokens = pretokenize(doc.text);
        // Group linguistic tokens into whitespace chunks so both segmentations
        // partition identical byte strings.
        chunks.clear();
        render_chunks(doc.text, chunks);
        size_t tok_i = 0;
        for (const auto& chunk : chunks) {
            std::vector<uint32_t> lime_ids;
            lime_rendered.clear();
            while (tok_i < tokens.size() && lime_rendered.size() < chunk.size()) {
                const std::string r = render_linguistic(doc.text, tokens[tok_i]);
                const auto& ids = lime_enc.encode_rendered(r);
                lime_ids.insert(lime_ids.end(), ids.begin(), ids.end());
                lime_rendered += r;
                ++tok_i;
            }
            require(lime_rendered == chunk, "tokenization_stats: chunk alignment drifted");
            const auto& plain_ids = plain_enc.encode_rendered(chunk);
            stats.lime_tokens += lime_ids.size();
            stats.plain_tokens += plain_ids.size();
            for (const uint32_t id : lime_ids) {
                lime_used[id] = true;
            }
            for (const uint32_t id : plain_ids) {
                plain_used[id] = true;
            }

            // Boundary offsets of both segmentations over the chunk bytes.
            const auto boundaries = [](const std::vector<uint32_t>& ids, const SubwordVocab& v) {
                std::vector<size_t> b{0};
                for (const uint32_t id : ids) {
                    b.push_back(b.back() + v.pieces[id].size());
                }
                return b;
            };
            const auto lb = boundaries(lime_ids, vocab);
            const auto pb = boundaries(plain_ids, plain_vocab);
            if (lb == pb) {
                continue;
            }
            // Walk shared boundaries; each maximal differing region between
            // two shared cuts is one disagreement event.
            size_t li = 0;
            size_t pi = 0;
            while (li + 1 < lb.size() || pi + 1 < pb.size()) {
                size_t lj = li + 1;
                size_t pj = pi + 1;
                while (lb[lj] != pb[pj]) {
                    if (lb[lj] < pb[pj]) {
                        ++lj;
                    } else {
                        ++pj;
                    }
                }
                if (lj - li > 1 || pj - pi > 1) {
                    std::string plain_txt;
                    std::string lime_txt;
                    for (size_t k = pi; k < pj; ++k) {
                        plain_txt += (k > pi ? "\x1F" : "") + chunk.substr(pb[k], pb[k + 1] - pb[k]);
                    }
                    for (size_t k = li; k < lj; ++k) {
                        lime_txt += (k > li ? "\x1F" : "") + chunk.substr(lb[k], lb[k + 1] - lb[k]);
                    }
                    ++regions[{plain_txt, lime_txt}];
                    ++region_total;
                }
                li = lj;
                pi = pj;
            }
        }
    }

    require(stats.plain_tokens > 0, "tokenization_stats: empty token stream");
    stats.token_inflation =
        static_cast<double>(stats.lime_tokens) / static_cast<double>(stats.plain_tokens) - 1.0;
    const auto used = [](const std::vector<bool>& v) {
        return static_cast<double>(std::count(v.begin(), v.end(), true));
    };
    stats.vocab_usage_delta = used(lime_used) / used(plain_used) - 1.0;

    std::vector<SplitSequence> ranked;
    ranked.reserve(regions.size());
    for (const auto& [key, count] : regions) {
        SplitSequence s;
        s.plain = key.first;
        s.lime = key.second;
        s.count = count;
        s.percent = region_total ? 100.0 * static_cast<double>(count) / static_cast<double>(region_total) : 0.0;
        ranked.push_back(std::move(s));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const SplitSequence& a, const SplitSequence& b) { return a.count > b.count; });
    if (ranked.size() > top_k) {
        ranked.resize(top_k);
    }
    stats.top_split_sequences = std::move(ranked);
    return stats;
}

void SubwordVocab::save(const std::filesystem::path& path) const {
    std::string out = "limevocab v1\npieces " + std::to_string(pieces.size()) + "\n";
    const auto escape = [](const std::string& piece) {
        std::string e;
        for (const char c : piece) {
            const auto b = static_cast<uint8_t>(c);
            if (c == '\\') {
                e += "\\\\";
            } else if (c == '\n') {
                e += "\\n";
            } else if (c == '\r') {
                e += "\\r";
            } else if (c == '\t') {
                e += "\\t";
            } else if (b < 0x20 || b == 0x7F) {
                static const char* hex = "0123456789abcdef";
                e += "\\x";
                e += hex[b >> 4];
                e += hex[b & 0xF];
            } else {
                e += c;
            }
        }
        return e;
    };
    for (const auto& piece : pieces) {
        out += escape(piece);
        out += '\n';
    }
    out += "merges " + std::to_string(merges.size()) + "\n";
    for (const auto& [l, r] : merges) {
        out += std::to_string(l) + " " + std::to_string(r) + "\n";
    }
    write_file_text(path, out);
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
    const std::string text = read_file_text(path);
    size_t pos = 0;
    const auto next_line = [&]() -> std::string {
        require(pos < text.size(), "vocab file truncated: " + path.string());
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        return line;
    };
    if (next_line() != "limevocab v1") {
        fail("not a vocab file: ", path.string());
    }
    const auto parse_count = [&](const std::string& line, const char* key) -> size_t {
        const std::string prefix = std::string(key) + " ";
        require(line.rfind(prefix, 0) == 0, "vocab file: expected '" + std::string(key) + " N'");
        return static_cast<size_t>(std::stoull(line.substr(prefix.size())));
    };
    SubwordVocab vocab;
    const size_t n_pieces = parse_count(next_line(), "pieces");
    const auto unescape = [&](const std::string& e) {
        std::string piece;
        for (size_t i = 0; i < e.size(); ++i) {
            if (e[i] != '\\') {
                piece += e[i];
                continue;
            }
            require(i + 1 < e.size(), "vocab file: dangling escape");
            const char c = e[++i];
            if (c == '\\') {
                piece += '\\';
            } else if (c == 'n') {
                piece += '\n';
            } else if (c == 'r') {
                piece += '\r';
            } else if (c == 't') {
                piece += '\t';
            } else if (c == 'x') {
                require(i + 2 < e.size(), "vocab file: bad \\x escape");
                piece += static_cast<char>(std::stoi(e.substr(i + 1, 2), nullptr, 16));
                i += 2;
            } else {
                fail("vocab file: unknown escape \\", std::string(1, c));
            }
        }
        return piece;
    };
    for (size_t i = 0; i < n_pieces; ++i) {
        vocab.pieces.push_back(unescape(next_line()));
    }
    const size_t n_merges = parse_count(next_line(), "merges");
    for (size_t i = 0; i < n_merges; ++i) {
        const std::string line = next_line();
        const size_t sp = line.find(' ');
        require(sp != std::string::npos, "vocab file: malformed merge line");
        const auto l = static_cast<uint32_t>(std::stoul(line.substr(0, sp)));
        const auto r = static_cast<uint32_t>(std::stoul(line.substr(sp + 1)));
        require(l < vocab.pieces.size() && r < vocab.pieces.size(), "vocab file: merge id out of range");
        vocab.merges.emplace_back(l, r);
    }
    require(vocab.pieces.size() >= SubwordVocab::kBaseAlphabet, "vocab file: missing byte alphabet");
    return vocab;
}

void write_lta(const std::filesystem::path& path, const std::vector<EncodedDocument>& docs,
               uint32_t vocab_size, const std::vector<DomainSchema>& domains) {
    require(domains.size() <= 255, "too many domains for the .lta header");
    ByteWriter w;
    w.str("LTA1");
    w.u32(vocab_size);
    w.u8(static_cast<uint8_t>(domains.size()));
    for (const auto& d : domains) {
        w.u16(d.size());
        std::string name = d.name.substr(0, 16);
        name.resize(16, '\0');
        w.str(name);
    }
    for (const auto& doc : docs) {
        require(doc.domain_classes.size() == domains.size(), "document domain count mismatch");
        w.u32(static_cast<uint32_t>(doc.token_ids.size()));
        for (size_t i = 0; i < doc.token_ids.size(); ++i) {
            w.u32(doc.token_ids[i]);
            for (size_t d = 0; d < domains.size(); ++d) {
                w.u16(doc.domain_classes[d][i]);
            }
        }
    }
    write_file_bytes(path, w.bytes);
}

LtaFile read_lta(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    if (r.str(4) != "LTA1") {
        fail("not a .lta file (bad magic): ", path.string());
    }
    LtaFile f;
    f.vocab_size = r.u32();
    const uint8_t n_domains = r.u8();
    for (uint8_t d = 0; d < n_domains; ++d) {
        f.domain_sizes.push_back(r.u16());
        std::string name = r.str(16);
        name.resize(name.find('\0') == std::string::npos ? 16 : name.find('\0'));
        f.domain_names.push_back(name);
    }
    uint64_t source_id = 0;
    while (r.pos < r.size) {
        const uint32_t len = r.u32();
        EncodedDocument doc;
        doc.source_id = source_id++;
        doc.token_ids.reserve(len);
        doc.domain_classes.assign(n_domains, {});
        for (auto& dc : doc.domain_classes) {
            dc.reserve(len);
        }
        for (uint32_t i = 0; i < len; ++i) {
            const uint32_t id = r.u32();
            require(id < f.vocab_size, ".lta token id out of range");
            doc.token_ids.push_back(id);
            for (uint8_t d = 0; d < n_domains; ++d) {
                const uint16_t cls = r.u16();
                require(cls < f.domain_sizes[d], ".lta class id out of range");
                doc.domain_classes[d].push_back(cls);
            }
        }
        f.docs.push_back(std::move(doc));
    }
    return f;
}

}  // namespace lime

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lime/annotate.hpp"
#include "lime/lingtok.hpp"
#include "lime/schema.hpp"

namespace lime {

struct Document;

// Byte-level BPE vocabulary. Ids are dense: 0 is the document separator,
// 1..256 are the single-byte pieces, 257+ are merge results in training
// order. Leading spaces render as the "▁" marker (U+2581); literal U+2581 and
// U+2582 in text are escaped prefix-free (▁ -> ▂1, ▂ -> ▂2) so decoding is
// byte-exact on every input.
struct SubwordVocab {
    std::vector<std::string> pieces;
    std::vector<std::pair<uint32_t, uint32_t>> merges;

    static constexpr uint32_t kSeparatorId = 0;
    static constexpr uint32_t kBaseAlphabet = 257;  // separator + 256 bytes
    static constexpr const char* kWsMarker = "\xE2\x96\x81";   // U+2581
    static constexpr const char* kEscapeChar = "\xE2\x96\x82";  // U+2582

    uint32_t size() const { return static_cast<uint32_t>(pieces.size()); }
    uint64_t fingerprint() const;

    void save(const std::filesystem::path& path) const;
    static SubwordVocab load(const std::filesystem::path& path);

    // Merge lookup table built lazily by encoders.
    struct PairHash {
        size_t operator()(const std::pair<uint32_t, uint32_t>& p) const {
            return std::hash<uint64_t>()((static_cast<uint64_t>(p.first) << 32) | p.second);
        }
    };
    using MergeRanks = std::unordered_map<std::pair<uint32_t, uint32_t>, uint32_t, PairHash>;
    MergeRanks merge_ranks() const;
};

// One subword token with one class id per metadata domain.
struct AnnotatedToken {
    uint32_t token_id = 0;
    std::vector<uint16_t> class_ids;
};

struct EncodedDocument {
    uint64_t source_id = 0;
    std::vector<uint32_t> token_ids;
    std::vector<Annotation> domain_classes;  // [|D|][n_tokens], unshifted
};

// Renders one linguistic token to the byte string the subword tokenizer sees:
// each leading space becomes the marker, other leading whitespace stays raw,
// surface bytes are escaped.
std::string render_linguistic(std::string_view text, const LinguisticToken& token);

// Trains byte-level BPE over linguistic-token renderings, so merges never
// cross linguistic boundaries. At each step the most frequent pair wins; ties
// break on the lexicographically smaller left piece, then right piece. The
// standalone marker never merges with a piece that starts with an ASCII digit
// (numbers keep their steerable "▁" prefix). Throws if target_vocab < 257.
SubwordVocab train_bpe(const std::vector<Document>& corpus, uint32_t target_vocab);

// Unconstrained reference used by tokenization_stats: identical algorithm,
// but trained on whitespace chunks instead of linguistic tokens.
SubwordVocab train_bpe_unconstrained(const std::vector<Document>& corpus, uint32_t target_vocab);

// Greedy merge-order encoding of one linguistic token. Output never spans the
// token: each token is encoded independently.
std::vector<uint32_t> encode_linguistic(std::string_view text, const LinguisticToken& token,
                                        const SubwordVocab& vocab, const SubwordVocab::MergeRanks& ranks);

// Shared piece-id cache keyed by rendered bytes; corpora repeat surfaces heavily.
class Encoder {
public:
    explicit Encoder(const SubwordVocab& vocab) : vocab_(vocab), ranks_(vocab.merge_ranks()) {}

    const std::vector<uint32_t>& encode_rendered(const std::string& rendered) const;
    std::vector<uint32_t> encode_text_linguistic(std::string_view text,
                                                 const std::vector<LinguisticToken>& tokens,
                                                 std::vector<uint32_t>* piece_counts) const;
    // Whitespace-chunk encoding on the same rendering rules (the plain-BPE baseline).
    std::vector<uint32_t> encode_text_plain(std::string_view text) const;

    const SubwordVocab& vocab() const { return vocab_; }

private:
    const SubwordVocab& vocab_;
    SubwordVocab::MergeRanks ranks_;
    mutable std::unordered_map<std::string, std::vector<uint32_t>> cache_;
};

// Inverse of encoding: concatenates piece bytes and undoes marker/escapes.
std::string decode(const std::vector<uint32_t>& ids, const SubwordVocab& vocab);

// g': repeats the annotation of linguistic token k over its piece_counts[k]
// subword pieces, per domain.
std::vector<Annotation> align_annotations(const std::vector<Annotation>& domain_annotations,
                                          const std::vector<uint32_t>& piece_counts);

// Stages (1)-(3): pretokenize, annotate per domain, encode within boundaries,
// align. Annotators must be ordered like the schema list they serve.
std::vector<AnnotatedToken> lime_tokenize(std::string_view text, const Encoder& encoder,
                                          const std::vector<const Annotator*>& annotators);

struct SplitSequence {
    // Piece renderings joined by the unit separator 0x1F.
    std::string plain;  // the coarser plain-BPE segmentation of the region
    std::string lime;   // the finer boundary-constrained segmentation
    uint64_t count = 0;
    double percent = 0.0;  // share among all disagreement regions
};

struct TokenizationStats {
    uint64_t lime_tokens = 0;
    uint64_t plain_tokens = 0;
    double token_inflation = 0.0;    // lime/plain - 1
    double vocab_usage_delta = 0.0;  // distinct-pieces-used ratio - 1
    std::vector<SplitSequence> top_split_sequences;
};

// Compares boundary-constrained tokenization against an unconstrained
// reference BPE of the same size trained on the same corpus.
TokenizationStats tokenization_stats(const std::vector<Document>& corpus, const SubwordVocab& vocab,
                                     size_t top_k = 15);

// .lta container: header (vocab size, domain table), then per document the
// token ids with unshifted per-domain class ids.
void write_lta(const std::filesystem::path& path, const std::vector<EncodedDocument>& docs,
               uint32_t vocab_size, const std::vector<DomainSchema>& domains);
struct LtaFile {
    uint32_t vocab_size = 0;
    std::vector<std::string> domain_names;
    std::vector<uint16_t> domain_sizes;
    std::vector<EncodedDocument> docs;
};
LtaFile read_lta(const std::filesystem::path& path);

}  // namespace lime

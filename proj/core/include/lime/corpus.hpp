#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lime/schema.hpp"
#include "lime/subtok.hpp"

namespace lime {

struct Document {
    uint64_t id = 0;
    std::string text;
};

enum class CorpusFormat { plain_lines, json_lines };

// Reads one document per line. json-lines records must carry a "text" field;
// malformed records are fatal with their line number unless skip_malformed.
std::vector<Document> load_documents(const std::filesystem::path& path, CorpusFormat format,
                                     bool skip_malformed = false);

// Deterministic disjoint split; test size = floor(n * test_fraction). Warns on
// an empty test side through the returned flag.
struct CorpusSplit {
    std::vector<Document> train;
    std::vector<Document> test;
    bool empty_test_warning = false;
};
CorpusSplit split_corpus(const std::vector<Document>& docs, double test_fraction, uint64_t seed);

// Fixed-shape training batch. Row-major [batch × seq_len]; classes are stored
// per domain. For LIME+1 the packer has already applied the look-ahead shift
// across the concatenated stream, so the model consumes class ids as-is.
struct PackedBatch {
    uint32_t batch = 0;
    uint32_t seq_len = 0;
    std::vector<uint32_t> inputs;                 // [batch * seq_len]
    std::vector<std::vector<uint16_t>> classes;   // [|D|][batch * seq_len]
    std::vector<uint32_t> targets;                // [batch * seq_len]
};

enum class ShiftMode : uint8_t { none, lookahead };

// Concatenation packing: every document is followed by one separator token
// (SPECIAL class in every domain); the stream is chunked into non-overlapping
// windows of seq_len+1 tokens (inputs = first seq_len, targets = last
// seq_len); the final partial window and final partial batch are dropped.
// With ShiftMode::lookahead, class ids are shifted one position left over the
// whole stream first (the last stream position gets each domain's x_class).
std::vector<PackedBatch> pack_sequences(const std::vector<EncodedDocument>& docs,
                                        const std::vector<DomainSchema>& domains, uint32_t seq_len,
                                        uint32_t batch, ShiftMode shift = ShiftMode::none);

}  // namespace lime

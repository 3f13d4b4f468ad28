#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lime/annotate.hpp"
#include "lime/corpus.hpp"
#include "lime/model.hpp"
#include "lime/subtok.hpp"
#include "lime/textgen.hpp"

namespace lime {

// FNV-1a over every parameter tensor (name, shape, then raw values), so a
// report can state exactly which weights produced it.
template <class T>
uint64_t params_fingerprint(const ModelConfig& config, const ModelParams<T>& params);

// Full pipeline from raw text to model-ready documents: pretokenize, annotate
// every domain, encode within linguistic boundaries, align classes to pieces.
std::vector<EncodedDocument> encode_documents(const std::vector<Document>& docs,
                                              const Encoder& encoder,
                                              const std::vector<const Annotator*>& annotators);

// Same pipeline with every domain's annotations corrupted at rate p before
// alignment. With p = 0 the output matches encode_documents exactly.
std::vector<EncodedDocument> encode_documents_noisy(const std::vector<Document>& docs,
                                                    const Encoder& encoder,
                                                    const std::vector<const Annotator*>& annotators,
                                                    double p, Rng& rng);

// Packs with the class shift the model's fusion mode requires.
std::vector<PackedBatch> prepare_batches(const std::vector<EncodedDocument>& docs,
                                         const ModelConfig& config, uint32_t batch);

struct EvalReport {
    double next_token_accuracy = 0.0;
    double mean_nll = 0.0;
    double perplexity = 0.0;
    uint64_t token_count = 0;
    uint64_t model_fingerprint = 0;
    FusionMode mode = FusionMode::BASE;
};

// Teacher-forced next-token accuracy and perplexity over packed batches.
template <class T>
EvalReport evaluate(const ModelConfig& config, const ModelParams<T>& params,
                    const std::vector<PackedBatch>& batches);

// ----------------------------------------------------------------------------
// Token coupling: which target tokens gain or lose when model B replaces
// model A on the very same token stream. Rows decompose the total accuracy
// difference exactly: the impacts sum to delta_accuracy.
// ----------------------------------------------------------------------------
struct CouplingRow {
    uint32_t token_id = 0;
    std::string piece;
    uint64_t occurrences = 0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double impact = 0.0;  // (correct_b - correct_a) / total positions
};

// Word-length bucket: positions whose target falls inside a word spanning
// `pieces` subword pieces (the last bucket aggregates longer words). The
// "excl" variant drops each word's first piece, which is the only piece not
// predicted from inside the word.
struct CouplingBucket {
    uint32_t pieces = 0;
    uint64_t words = 0;
    uint64_t positions_incl = 0;
    uint64_t positions_excl = 0;
    double accuracy_a_incl = 0.0;
    double accuracy_b_incl = 0.0;
    double accuracy_a_excl = 0.0;
    double accuracy_b_excl = 0.0;
};

struct CouplingReport {
    uint64_t positions = 0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double delta_accuracy = 0.0;
    std::vector<CouplingRow> rows;        // sorted by |impact| descending
    std::vector<CouplingBucket> buckets;  // word length 1, 2, 3, 4-or-more
};

// Both batch lists must carry identical inputs and targets; only the class
// channels may differ. A word is a maximal run of target pieces whose content
// is letters, apostrophes, or hyphens with at least one letter, broken at
// each piece that renders with the leading-space marker.
template <class T>
CouplingReport coupling_report(const ModelConfig& config_a, const ModelParams<T>& params_a,
                               const std::vector<PackedBatch>& batches_a,
                               const ModelConfig& config_b, const ModelParams<T>& params_b,
                               const std::vector<PackedBatch>& batches_b,
                               const SubwordVocab& vocab);

// ----------------------------------------------------------------------------
// Annotation-quality protocols.
// ----------------------------------------------------------------------------
struct NoisePoint {
    double p = 0.0;
    EvalReport report;
};

// Re-runs the encode-and-evaluate pipeline at each corruption level. Levels
// use independent streams off `seed`, so p = 0 reproduces the clean result
// bit for bit. Refuses models that consume no metadata.
template <class T>
std::vector<NoisePoint> noise_sweep(const ModelConfig& config, const ModelParams<T>& params,
                                    const std::vector<Document>& docs, const Encoder& encoder,
                                    const std::vector<const Annotator*>& annotators,
                                    const std::vector<double>& levels, uint32_t batch,
                                    uint64_t seed);

struct CausalEvalResult {
    EvalReport standard;
    EvalReport causal;
    double annotation_agreement = 0.0;  // share of token-domain positions unchanged
};

// Evaluates once with ordinary whole-sentence annotation and once with the
// strictly-causal variant (position i annotated from tokens 0..i only).
template <class T>
CausalEvalResult causal_evaluate(const ModelConfig& config, const ModelParams<T>& params,
                                 const std::vector<Document>& docs, const Encoder& encoder,
                                 const std::vector<const Annotator*>& annotators, uint32_t batch);

// ----------------------------------------------------------------------------
// Steering protocols. Both need a look-ahead model: the final prompt position
// carries the not-yet-known upcoming class, and steering overwrites it.
// ----------------------------------------------------------------------------
struct ArithmeticResult {
    uint64_t instances = 0;
    double unsteered_accuracy = 0.0;
    double steered_accuracy = 0.0;
    double unsteered_numeric_rate = 0.0;  // completion is a bare digit run
    double steered_numeric_rate = 0.0;
};

// Truncated-sum prompts over the operand grid [5,49] x [5,49], shuffled under
// `seed`; max_instances = 0 runs the full grid. The steered pass sets each
// domain's number class (CD or CARDINAL where present) at the final position.
template <class T>
ArithmeticResult arithmetic_steering(const ModelConfig& config, const ModelParams<T>& params,
                                     const Encoder& encoder,
                                     const std::vector<const Annotator*>& annotators,
                                     size_t max_instances, uint64_t seed);

struct RetrievalPoint {
    int noise_tokens = 0;
    uint64_t instances = 0;
    double unsteered_accuracy = 0.0;  // gold appears in the first 8 words
    double steered_accuracy = 0.0;    // first word is the gold property
};

// Room-property retrieval under growing filler: the fact sits `noise_tokens`
// of prose before the repeated cue. Steering sets the adjective class at the
// cue's final position.
template <class T>
std::vector<RetrievalPoint> retrieval_eval(const ModelConfig& config, const ModelParams<T>& params,
                                           const Encoder& encoder,
                                           const std::vector<const Annotator*>& annotators,
                                           const TextGenerator& gen,
                                           const std::vector<int>& noise_levels,
                                           size_t instances_per_level, uint64_t seed);

// The id-to-classes callback generation needs: decode the ids, pretokenize,
// annotate every domain, then give each piece the classes of the linguistic
// token containing its first decoded byte (separators get SPECIAL). Matches
// the training-time alignment exactly. The encoder must outlive the callback.
Relabeler make_relabeler(const Encoder& encoder, std::vector<const Annotator*> annotators);

}  // namespace lime

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lime/common.hpp"
#include "lime/lingtok.hpp"
#include "lime/schema.hpp"

namespace lime {

// Interface shared by all annotators: one class id per linguistic token.
// The causal variant computes position i from tokens[0..=i] only; the default
// implementation is the literal O(n^2) prefix re-annotation.
class Annotator {
public:
    virtual ~Annotator() = default;
    virtual Annotation annotate(std::string_view text, const std::vector<LinguisticToken>& tokens) const = 0;
    virtual Annotation annotate_causal(std::string_view text, const std::vector<LinguisticToken>& tokens) const;
    virtual const DomainSchema& schema() const = 0;
};

// ----------------------------------------------------------------------------
// Averaged perceptron part-of-speech tagger (Collins-style). Features look at
// the current token, the previous token and tag, and one token ahead — never
// further, which keeps the exact strictly-causal decode linear-time.
// ----------------------------------------------------------------------------
struct TaggedToken {
    std::string surface;
    uint16_t class_id;
};
using TaggedSentence = std::vector<TaggedToken>;

class PerceptronTagger : public Annotator {
public:
    PerceptronTagger() = default;
    explicit PerceptronTagger(DomainSchema schema) : schema_(std::move(schema)) {}

    Annotation annotate(std::string_view text, const std::vector<LinguisticToken>& tokens) const override;
    Annotation annotate_causal(std::string_view text, const std::vector<LinguisticToken>& tokens) const override;
    const DomainSchema& schema() const override { return schema_; }

    Annotation annotate_surfaces(const std::vector<std::string_view>& surfaces) const;

    bool trained() const { return !weights_.empty(); }
    size_t feature_count() const { return feature_ids_.size(); }

    void save(const std::filesystem::path& path) const;
    static PerceptronTagger load(const std::filesystem::path& path, DomainSchema schema);

private:
    friend PerceptronTagger train_pos_tagger(const std::vector<TaggedSentence>& corpus,
                                             const DomainSchema& schema, int epochs, uint64_t seed);

    uint16_t predict(const std::vector<std::string>& features) const;
    void gather_features(const std::vector<std::string_view>& surfaces, size_t i,
                         uint16_t prev_tag, bool next_is_boundary,
                         std::vector<std::string>& out) const;

    DomainSchema schema_;
    std::unordered_map<std::string, uint32_t> feature_ids_;
    std::vector<double> weights_;  // [n_features × |classes|]
};

// Trains with per-epoch sentence shuffling under `seed` and returns the
// averaged-weight tagger. Throws on an empty corpus or untagged labels.
PerceptronTagger train_pos_tagger(const std::vector<TaggedSentence>& corpus,
                                  const DomainSchema& schema, int epochs, uint64_t seed);

// ----------------------------------------------------------------------------
// Rule-based named-entity annotation: longest gazetteer match (earliest start
// wins across overlaps), then pattern rules on the remaining tokens — digit
// runs become CARDINAL, a digit run plus "%" becomes PERCENT on both tokens,
// a currency symbol plus digit run becomes MONEY on both tokens.
// ----------------------------------------------------------------------------
class Gazetteer {
public:
    // Phrases are pre-tokenized with pretokenize(); multi-token phrases match
    // consecutive surfaces exactly.
    void add(const std::string& phrase, const std::string& label);
    static Gazetteer from_tsv(const std::filesystem::path& path);
    static Gazetteer from_tsv_text(std::string_view text);

    struct Entry {
        std::vector<std::string> surfaces;
        std::string label;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    const std::vector<size_t>* candidates(std::string_view first_surface) const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::vector<size_t>> by_first_;
};

Annotation annotate_ner(std::string_view text, const std::vector<LinguisticToken>& tokens,
                        const Gazetteer& gazetteer, const DomainSchema& schema);

class RuleNer : public Annotator {
public:
    RuleNer(DomainSchema schema, Gazetteer gazetteer)
        : schema_(std::move(schema)), gazetteer_(std::move(gazetteer)) {}

    Annotation annotate(std::string_view text, const std::vector<LinguisticToken>& tokens) const override {
        return annotate_ner(text, tokens, gazetteer_, schema_);
    }
    const DomainSchema& schema() const override { return schema_; }
    const Gazetteer& gazetteer() const { return gazetteer_; }

private:
    DomainSchema schema_;
    Gazetteer gazetteer_;
};

// Free-function form of the module contract; `annotate` on a tagger.
Annotation annotate(std::string_view text, const std::vector<LinguisticToken>& tokens,
                    const DomainSchema& domain, const PerceptronTagger& tagger);

// Each position independently replaced with probability p by a class drawn
// uniformly from the full set (the draw may equal the original).
Annotation inject_noise(const Annotation& ann, double p, const DomainSchema& domain, Rng& rng);

// The literal prefix-causal contract, usable with any annotator.
Annotation annotate_causal(std::string_view text, const std::vector<LinguisticToken>& tokens,
                           const Annotator& annotator);

}  // namespace lime

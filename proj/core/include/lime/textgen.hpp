#pragma once

#include <string>
#include <vector>

#include "lime/annotate.hpp"
#include "lime/common.hpp"
#include "lime/schema.hpp"

namespace lime {

// Deterministic template corpus with gold part-of-speech classes and
// gazetteer-backed entities. One generator feeds four consumers: tagger
// training sentences, the model training corpus, the arithmetic protocol,
// and the People-in-Rooms protocol, so their distributions agree.
class TextGenerator {
public:
    TextGenerator(const DomainSchema& pos, const DomainSchema& ner);

    // One training document: mostly multi-sentence prose, with a slice of
    // arithmetic lines (60% of them cut off after "= ") and a slice of
    // room-property documents so the steering protocols are in-distribution.
    std::string document(Rng& rng) const;

    // Gold-tagged sentences for perceptron training, drawn from the same
    // templates (prose plus arithmetic and room-property lines).
    std::vector<TaggedSentence> tagged_sentences(Rng& rng, size_t n) const;

    // Entity surface table for the rule annotator, one "surface<TAB>label"
    // line per entry; covers every name the templates can emit.
    std::string gazetteer_tsv() const;

    // The arithmetic prompt; the training corpus and the evaluation build it
    // from this one function so the strings match byte for byte.
    static std::string arithmetic_prompt(int a, int b);

    struct PirInstance {
        std::string prompt;  // ends with ":", no trailing whitespace
        std::string gold;    // the property adjective to be retrieved
    };

    // Fact sentence, cue with the property, ~noise_tokens of filler prose,
    // then the cue again. The instance stops at the cue; the document form
    // appends the answer for training.
    PirInstance pir_instance(Rng& rng, int noise_tokens) const;
    std::string pir_document(Rng& rng, int noise_tokens) const;

private:
    struct Tok {
        std::string surface;
        uint16_t pos;
        bool attach = false;  // glued to the previous token (no space)
    };

    uint16_t pos_id(const char* label) const;
    std::string render(const std::vector<Tok>& toks) const;
    void sentence(Rng& rng, std::vector<Tok>& out) const;
    void arithmetic_line(Rng& rng, std::vector<Tok>& out, bool truncated, int* a = nullptr,
                         int* b = nullptr) const;
    void pir_fact(Rng& rng, std::vector<Tok>& out, std::string* gold) const;
    void pir_cue(std::vector<Tok>& out, const std::string* answer) const;
    std::vector<Tok> pir_tokens(Rng& rng, int noise_tokens, bool with_answer,
                                std::string* gold) const;

    const DomainSchema& pos_;
    const DomainSchema& ner_;
    uint16_t nn_, nns_, nnp_, jj_, jjr_, jjs_, vb_, vbz_, vbd_, vbg_, vbp_, md_, rb_, in_, dt_,
        cc_, prp_, prps_, ex_, pos_tag_, hyph_, cd_, to_, period_, comma_, colon_, nfp_, dollar_;
};

}  // namespace lime

#include "lime/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <utility>

#include "lime/lingtok.hpp"

namespace lime {

namespace {

struct ScoreAccum {
    uint64_t correct = 0;
    uint64_t count = 0;
    double nll = 0.0;
};

template <class T>
void score_batch(const ModelConfig& config, const ModelParams<T>& params, const PackedBatch& pb,
                 Activations<T>& acts, ScoreAccum& accum, std::vector<uint8_t>* correct_flags) {
    const ModelInput in = to_model_input(pb);
    forward(config, params, in, acts);
    const int n = in.positions();
    for (int p = 0; p < n; ++p) {
        const auto row = acts.logits.row(p).array();
        Eigen::Index best = 0;
        const T mx = row.maxCoeff(&best);
        const double lse =
            static_cast<double>(mx) + std::log(static_cast<double>((row - mx).exp().sum()));
        const uint32_t target = in.targets[static_cast<size_t>(p)];
        accum.nll += lse - static_cast<double>(row[static_cast<Eigen::Index>(target)]);
        const bool hit = static_cast<uint32_t>(best) == target;
        accum.correct += hit ? 1 : 0;
        accum.count += 1;
        if (correct_flags != nullptr) {
            correct_flags->push_back(hit ? 1 : 0);
        }
    }
}

// Word-piece classification for the coupling buckets. A piece is part of a
// word when its content (after the leading-space marker, if any) is letters,
// apostrophes (ASCII or U+2019), or hyphens.
struct PieceTraits {
    bool word = false;
    bool marker = false;
    bool alpha = false;
};

PieceTraits classify_piece(std::string_view s) {
    PieceTraits t;
    constexpr std::string_view kMarker = "\xE2\x96\x81";
    if (s.substr(0, kMarker.size()) == kMarker) {
        t.marker = true;
        s.remove_prefix(kMarker.size());
    }
    if (s.empty()) {
        return t;  // a bare marker is whitespace, not a word
    }
    size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z')) {
            t.alpha = true;
            i += 1;
        } else if (c == '\'' || c == '-') {
            i += 1;
        } else if (s.compare(i, 3, "\xE2\x80\x99") == 0) {
            i += 3;
        } else {
            return t;
        }
    }
    t.word = true;
    return t;
}

std::string trimmed(std::string s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    return s.substr(b, e - b);
}

bool all_digits(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    for (const char c : s) {
        if (c < '0' || c > '9') {
            return false;
        }
    }
    return true;
}

// Letters-only view of a word, dropping hyphens, apostrophes, and punctuation.
std::string letters_only(std::string_view w) {
    std::string out;
    for (const char c : w) {
        if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z')) {
            out.push_back(c);
        }
    }
    return out;
}

std::vector<std::string> completion_words(const std::string& text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') {
            ++i;
        }
        const size_t start = i;
        while (i < text.size() && text[i] != ' ') {
            ++i;
        }
        if (i > start) {
            std::string w = letters_only(std::string_view(text).substr(start, i - start));
            if (!w.empty()) {
                words.push_back(std::move(w));
            }
        }
    }
    return words;
}

std::vector<EncodedDocument> encode_pipeline(const std::vector<Document>& docs,
                                             const Encoder& encoder,
                                             const std::vector<const Annotator*>& annotators,
                                             const double* noise_p, Rng* rng) {
    std::vector<EncodedDocument> out;
    out.reserve(docs.size());
    for (const Document& doc : docs) {
        const auto toks = pretokenize(doc.text);
        EncodedDocument enc;
        enc.source_id = doc.id;
        std::vector<uint32_t> piece_counts;
        enc.token_ids = encoder.encode_text_linguistic(doc.text, toks, &piece_counts);
        std::vector<Annotation> anns;
        anns.reserve(annotators.size());
        for (const Annotator* a : annotators) {
            Annotation ann = a->annotate(doc.text, toks);
            if (noise_p != nullptr) {
                ann = inject_noise(ann, *noise_p, a->schema(), *rng);
            }
            anns.push_back(std::move(ann));
        }
        enc.domain_classes = align_annotations(anns, piece_counts);
        out.push_back(std::move(enc));
    }
    return out;
}

// Per-domain steering classes found by label; domains without the label keep
// the unknown class.
std::vector<int> steer_by_label(const std::vector<DomainSchema>& domains,
                                const std::vector<std::string>& labels) {
    std::vector<int> steer(domains.size(), -1);
    bool any = false;
    for (size_t d = 0; d < domains.size(); ++d) {
        for (const std::string& label : labels) {
            const int id = domains[d].class_id(label);
            if (id >= 0) {
                steer[d] = id;
                any = true;
                break;
            }
        }
    }
    require(any, "steering: no domain carries a matching class label");
    return steer;
}

}  // namespace

template <class T>
uint64_t params_fingerprint(const ModelConfig& config, const ModelParams<T>& params) {
    auto refs = tensor_refs(const_cast<ModelParams<T>&>(params), config);
    uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& r : refs) {
        h = fnv1a64(r.name.data(), r.name.size(), h);
        const uint64_t shape[2] = {static_cast<uint64_t>(r.rows), static_cast<uint64_t>(r.cols)};
        h = fnv1a64(shape, sizeof shape, h);
        h = fnv1a64(r.data, sizeof(T) * static_cast<size_t>(r.size()), h);
    }
    return h;
}

std::vector<EncodedDocument> encode_documents(const std::vector<Document>& docs,
                                              const Encoder& encoder,
                                              const std::vector<const Annotator*>& annotators) {
    return encode_pipeline(docs, encoder, annotators, nullptr, nullptr);
}

std::vector<EncodedDocument> encode_documents_noisy(const std::vector<Document>& docs,
                                                    const Encoder& encoder,
                                                    const std::vector<const Annotator*>& annotators,
                                                    double p, Rng& rng) {
    return encode_pipeline(docs, encoder, annotators, &p, &rng);
}

std::vector<PackedBatch> prepare_batches(const std::vector<EncodedDocument>& docs,
                                         const ModelConfig& config, uint32_t batch) {
    const ShiftMode shift =
        config.mode == FusionMode::LIME_PLUS_ONE ? ShiftMode::lookahead : ShiftMode::none;
    return pack_sequences(docs, config.domains, static_cast<uint32_t>(config.seq_len), batch,
                          shift);
}

template <class T>
EvalReport evaluate(const ModelConfig& config, const ModelParams<T>& params,
                    const std::vector<PackedBatch>& batches) {
    require(!batches.empty(), "evaluate: no batches (corpus too small for one window)");
    Activations<T> acts;
    ScoreAccum accum;
    for (const PackedBatch& pb : batches) {
        score_batch(config, params, pb, acts, accum, nullptr);
    }
    EvalReport report;
    report.token_count = accum.count;
    report.next_token_accuracy = static_cast<double>(accum.correct) / static_cast<double>(accum.count);
    report.mean_nll = accum.nll / static_cast<double>(accum.count);
    report.perplexity = std::exp(report.mean_nll);
    report.model_fingerprint = params_fingerprint(config, params);
    report.mode = config.mode;
    return report;
}

template <class T>
CouplingReport coupling_report(const ModelConfig& config_a, const ModelParams<T>& params_a,
                               const std::vector<PackedBatch>& batches_a,
                               const ModelConfig& config_b, const ModelParams<T>& params_b,
                               const std::vector<PackedBatch>& batches_b,
                               const SubwordVocab& vocab) {
    require(batches_a.size() == batches_b.size(), "coupling: batch counts differ");
    require(!batches_a.empty(), "coupling: no batches");
    for (size_t i = 0; i < batches_a.size(); ++i) {
        const PackedBatch& pa = batches_a[i];
        const PackedBatch& pb = batches_b[i];
        require(pa.batch == pb.batch && pa.seq_len == pb.seq_len,
                "coupling: batch shapes differ");
        require(pa.inputs == pb.inputs && pa.targets == pb.targets,
                "coupling: models were fed different token streams");
    }

    Activations<T> acts;
    ScoreAccum accum_a, accum_b;
    std::vector<uint8_t> correct_a, correct_b;
    for (size_t i = 0; i < batches_a.size(); ++i) {
        score_batch(config_a, params_a, batches_a[i], acts, accum_a, &correct_a);
        score_batch(config_b, params_b, batches_b[i], acts, accum_b, &correct_b);
    }
    const uint64_t n = accum_a.count;

    CouplingReport report;
    report.positions = n;
    report.accuracy_a = static_cast<double>(accum_a.correct) / static_cast<double>(n);
    report.accuracy_b = static_cast<double>(accum_b.correct) / static_cast<double>(n);
    report.delta_accuracy = report.accuracy_b - report.accuracy_a;

    // Rows: one entry per distinct target token; impacts are computed against
    // the shared denominator so they sum to delta_accuracy.
    struct RowAccum {
        uint64_t occ = 0;
        uint64_t ca = 0;
        uint64_t cb = 0;
    };
    std::unordered_map<uint32_t, RowAccum> by_token;
    size_t flat = 0;
    for (const PackedBatch& pb : batches_a) {
        for (const uint32_t target : pb.targets) {
            RowAccum& r = by_token[target];
            r.occ += 1;
            r.ca += correct_a[flat];
            r.cb += correct_b[flat];
            ++flat;
        }
    }
    report.rows.reserve(by_token.size());
    for (const auto& [token_id, r] : by_token) {
        CouplingRow row;
        row.token_id = token_id;
        row.piece = token_id < vocab.pieces.size() ? vocab.pieces[token_id] : std::string();
        row.occurrences = r.occ;
        row.accuracy_a = static_cast<double>(r.ca) / static_cast<double>(r.occ);
        row.accuracy_b = static_cast<double>(r.cb) / static_cast<double>(r.occ);
        row.impact = (static_cast<double>(r.cb) - static_cast<double>(r.ca)) / static_cast<double>(n);
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const CouplingRow& x, const CouplingRow& y) {
        const double ax = std::abs(x.impact);
        const double ay = std::abs(y.impact);
        if (ax != ay) {
            return ax > ay;
        }
        return x.token_id < y.token_id;
    });

    // Buckets over word length in pieces.
    constexpr uint32_t kMaxBucket = 4;
    struct BucketAccum {
        uint64_t words = 0;
        uint64_t pos_incl = 0, pos_excl = 0;
        uint64_t ca_incl = 0, cb_incl = 0, ca_excl = 0, cb_excl = 0;
    };
    std::array<BucketAccum, kMaxBucket> bk{};

    size_t base = 0;
    for (const PackedBatch& pb : batches_a) {
        for (uint32_t row = 0; row < pb.batch; ++row) {
            const size_t off = base + static_cast<size_t>(row) * pb.seq_len;
            size_t run_start = 0;
            size_t run_len = 0;
            bool run_alpha = false;
            const auto close_run = [&] {
                if (run_len > 0 && run_alpha) {
                    BucketAccum& b = bk[std::min<size_t>(run_len, kMaxBucket) - 1];
                    b.words += 1;
                    for (size_t k = 0; k < run_len; ++k) {
                        const size_t p = off + run_start + k;
                        b.pos_incl += 1;
                        b.ca_incl += correct_a[p];
                        b.cb_incl += correct_b[p];
                        if (k > 0) {
                            b.pos_excl += 1;
                            b.ca_excl += correct_a[p];
                            b.cb_excl += correct_b[p];
                        }
                    }
                }
                run_len = 0;
                run_alpha = false;
            };
            for (uint32_t s = 0; s < pb.seq_len; ++s) {
                const uint32_t id = pb.targets[static_cast<size_t>(row) * pb.seq_len + s];
                if (id == SubwordVocab::kSeparatorId || id >= vocab.pieces.size()) {
                    close_run();
                    continue;
                }
                const PieceTraits t = classify_piece(vocab.pieces[id]);
                if (!t.word) {
                    close_run();
                    continue;
                }
                if (t.marker) {
                    close_run();
                    run_start = s;
                    run_len = 1;
                } else if (run_len == 0) {
                    run_start = s;  // word cut by the window edge
                    run_len = 1;
                } else {
                    run_len += 1;
                }
                run_alpha = run_alpha || t.alpha;
            }
            close_run();
        }
        base += static_cast<size_t>(pb.batch) * pb.seq_len;
    }
    const auto ratio = [](uint64_t num, uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    for (uint32_t i = 0; i < kMaxBucket; ++i) {
        CouplingBucket b;
        b.pieces = i + 1;
        b.words = bk[i].words;
        b.positions_incl = bk[i].pos_incl;
        b.positions_excl = bk[i].pos_excl;
        b.accuracy_a_incl = ratio(bk[i].ca_incl, bk[i].pos_incl);
        b.accuracy_b_incl = ratio(bk[i].cb_incl, bk[i].pos_incl);
        b.accuracy_a_excl = ratio(bk[i].ca_excl, bk[i].pos_excl);
        b.accuracy_b_excl = ratio(bk[i].cb_excl, bk[i].pos_excl);
        report.buckets.push_back(b);
    }
    return report;
}

template <class T>
std::vector<NoisePoint> noise_sweep(const ModelConfig& config, const ModelParams<T>& params,
                                    const std::vector<Document>& docs, const Encoder& encoder,
                                    const std::vector<const Annotator*>& annotators,
                                    const std::vector<double>& levels, uint32_t batch,
                                    uint64_t seed) {
    require(config.mode != FusionMode::BASE, "noise sweep: the model consumes no annotations");
    for (const double p : levels) {
        require(p >= 0.0 && p <= 1.0, "noise sweep: level outside [0, 1]");
    }
    std::vector<NoisePoint> out;
    out.reserve(levels.size());
    for (size_t i = 0; i < levels.size(); ++i) {
        Rng rng(seed + i * 0x9E3779B97F4A7C15ULL);
        const auto enc = encode_documents_noisy(docs, encoder, annotators, levels[i], rng);
        const auto batches = prepare_batches(enc, config, batch);
        out.push_back({levels[i], evaluate(config, params, batches)});
    }
    return out;
}

template <class T>
CausalEvalResult causal_evaluate(const ModelConfig& config, const ModelParams<T>& params,
                                 const std::vector<Document>& docs, const Encoder& encoder,
                                 const std::vector<const Annotator*>& annotators, uint32_t batch) {
    std::vector<EncodedDocument> standard, causal;
    standard.reserve(docs.size());
    causal.reserve(docs.size());
    uint64_t agree = 0, total = 0;
    for (const Document& doc : docs) {
        const auto toks = pretokenize(doc.text);
        std::vector<uint32_t> piece_counts;
        std::vector<uint32_t> ids = encoder.encode_text_linguistic(doc.text, toks, &piece_counts);
        std::vector<Annotation> std_anns, causal_anns;
        for (const Annotator* a : annotators) {
            Annotation full = a->annotate(doc.text, toks);
            Annotation pfx = annotate_causal(doc.text, toks, *a);
            require(full.size() == pfx.size(), "causal eval: annotation length mismatch");
            for (size_t k = 0; k < full.size(); ++k) {
                agree += full[k] == pfx[k] ? 1 : 0;
            }
            total += full.size();
            std_anns.push_back(std::move(full));
            causal_anns.push_back(std::move(pfx));
        }
        EncodedDocument s;
        s.source_id = doc.id;
        s.token_ids = ids;
        s.domain_classes = align_annotations(std_anns, piece_counts);
        EncodedDocument c;
        c.source_id = doc.id;
        c.token_ids = std::move(ids);
        c.domain_classes = align_annotations(causal_anns, piece_counts);
        standard.push_back(std::move(s));
        causal.push_back(std::move(c));
    }
    CausalEvalResult result;
    result.standard = evaluate(config, params, prepare_batches(standard, config, batch));
    result.causal = evaluate(config, params, prepare_batches(causal, config, batch));
    result.annotation_agreement =
        total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
    return result;
}

template <class T>
ArithmeticResult arithmetic_steering(const ModelConfig& config, const ModelParams<T>& params,
                                     const Encoder& encoder,
                                     const std::vector<const Annotator*>& annotators,
                                     size_t max_instances, uint64_t seed) {
    require(config.mode == FusionMode::LIME_PLUS_ONE,
            "arithmetic steering: needs a look-ahead model");
    std::vector<std::pair<int, int>> grid;
    for (int a = 5; a <= 49; ++a) {
        for (int b = 5; b <= 49; ++b) {
            grid.emplace_back(a, b);
        }
    }
    Rng rng(seed);
    rng.shuffle(grid);
    if (max_instances != 0 && grid.size() > max_instances) {
        grid.resize(max_instances);
    }

    const Relabeler relabel = make_relabeler(encoder, annotators);
    const std::vector<int> steer = steer_by_label(config.domains, {"CD", "CARDINAL"});

    ArithmeticResult result;
    result.instances = grid.size();
    uint64_t hit[2] = {0, 0}, numeric[2] = {0, 0};
    for (const auto& [a, b] : grid) {
        const std::string prompt = TextGenerator::arithmetic_prompt(a, b);
        const auto toks = pretokenize(prompt);
        const std::vector<uint32_t> ids = encoder.encode_text_linguistic(prompt, toks, nullptr);
        const std::string gold = std::to_string(a + b);
        for (int pass = 0; pass < 2; ++pass) {
            GenerateOptions opts;
            opts.max_steps = 4;
            if (pass == 1) {
                opts.steer = steer;
            }
            const auto completion = generate_greedy(config, params, ids, relabel, opts);
            const std::string text = trimmed(decode(completion, encoder.vocab()));
            numeric[pass] += all_digits(text) ? 1 : 0;
            hit[pass] += text == gold ? 1 : 0;
        }
    }
    const auto rate = [&](uint64_t c) {
        return grid.empty() ? 0.0 : static_cast<double>(c) / static_cast<double>(grid.size());
    };
    result.unsteered_accuracy = rate(hit[0]);
    result.steered_accuracy = rate(hit[1]);
    result.unsteered_numeric_rate = rate(numeric[0]);
    result.steered_numeric_rate = rate(numeric[1]);
    return result;
}

template <class T>
std::vector<RetrievalPoint> retrieval_eval(const ModelConfig& config, const ModelParams<T>& params,
                                           const Encoder& encoder,
                                           const std::vector<const Annotator*>& annotators,
                                           const TextGenerator& gen,
                                           const std::vector<int>& noise_levels,
                                           size_t instances_per_level, uint64_t seed) {
    require(config.mode == FusionMode::LIME_PLUS_ONE, "retrieval: needs a look-ahead model");
    require(instances_per_level > 0, "retrieval: need at least one instance per level");
    const Relabeler relabel = make_relabeler(encoder, annotators);
    const std::vector<int> steer = steer_by_label(config.domains, {"JJ"});

    std::vector<RetrievalPoint> out;
    out.reserve(noise_levels.size());
    for (size_t li = 0; li < noise_levels.size(); ++li) {
        Rng rng(seed + li * 0x9E3779B97F4A7C15ULL);
        RetrievalPoint point;
        point.noise_tokens = noise_levels[li];
        point.instances = instances_per_level;
        uint64_t hit_unsteered = 0, hit_steered = 0;
        for (size_t k = 0; k < instances_per_level; ++k) {
            const auto inst = gen.pir_instance(rng, noise_levels[li]);
            const auto toks = pretokenize(inst.prompt);
            const std::vector<uint32_t> ids =
                encoder.encode_text_linguistic(inst.prompt, toks, nullptr);

            GenerateOptions opts;
            opts.max_steps = 24;
            auto words =
                completion_words(decode(generate_greedy(config, params, ids, relabel, opts),
                                        encoder.vocab()));
            for (size_t w = 0; w < words.size() && w < 8; ++w) {
                if (words[w] == inst.gold) {
                    hit_unsteered += 1;
                    break;
                }
            }

            opts.max_steps = 6;
            opts.steer = steer;
            words = completion_words(decode(generate_greedy(config, params, ids, relabel, opts),
                                            encoder.vocab()));
            hit_steered += !words.empty() && words.front() == inst.gold ? 1 : 0;
        }
        point.unsteered_accuracy =
            static_cast<double>(hit_unsteered) / static_cast<double>(instances_per_level);
        point.steered_accuracy =
            static_cast<double>(hit_steered) / static_cast<double>(instances_per_level);
        out.push_back(point);
    }
    return out;
}

Relabeler make_relabeler(const Encoder& encoder, std::vector<const Annotator*> annotators) {
    require(!annotators.empty(), "relabeler: need at least one annotator");
    return [&encoder, annotators](const std::vector<uint32_t>& ids) {
        const SubwordVocab& vocab = encoder.vocab();
        const size_t n_domains = annotators.size();
        std::vector<Annotation> result(n_domains);
        if (ids.empty()) {
            return result;
        }

        // Concatenate piece bytes, remembering where each piece starts.
        std::string bytes;
        std::vector<size_t> raw_start(ids.size());
        for (size_t j = 0; j < ids.size(); ++j) {
            const uint32_t id = ids[j];
            require(id < vocab.pieces.size(), "relabeler: token id out of range");
            raw_start[j] = bytes.size();
            if (id != SubwordVocab::kSeparatorId) {
                bytes += vocab.pieces[id];
            }
        }

        // Undo the rendering while mapping every raw byte to the decoded
        // offset its transform group starts at. A piece beginning inside a
        // marker or escape sequence inherits that group's output position.
        constexpr std::string_view kMarker = "\xE2\x96\x81";
        constexpr std::string_view kEscape = "\xE2\x96\x82";
        std::string text;
        text.reserve(bytes.size());
        std::vector<size_t> decoded_at(bytes.size() + 1, 0);
        size_t i = 0;
        while (i < bytes.size()) {
            const size_t out_start = text.size();
            size_t consumed = 1;
            if (bytes.compare(i, 3, kMarker) == 0) {
                text.push_back(' ');
                consumed = 3;
            } else if (bytes.compare(i, 3, kEscape) == 0 && i + 3 < bytes.size()) {
                text.append(bytes[i + 3] == '1' ? kMarker : kEscape);
                consumed = 4;
            } else {
                text.push_back(bytes[i]);
            }
            for (size_t k = 0; k < consumed; ++k) {
                decoded_at[i + k] = out_start;
            }
            i += consumed;
        }
        decoded_at[bytes.size()] = text.size();

        const auto toks = pretokenize(text);
        std::vector<Annotation> anns(n_domains);
        for (size_t d = 0; d < n_domains; ++d) {
            anns[d] = annotators[d]->annotate(text, toks);
            result[d].resize(ids.size());
        }

        // Each piece takes the classes of the linguistic token that contains
        // its first decoded byte; token spans tile the text in order.
        size_t t = 0;
        for (size_t j = 0; j < ids.size(); ++j) {
            if (ids[j] == SubwordVocab::kSeparatorId) {
                for (size_t d = 0; d < n_domains; ++d) {
                    result[d][j] = annotators[d]->schema().special_class;
                }
                continue;
            }
            const size_t off = decoded_at[raw_start[j]];
            while (t + 1 < toks.size() && static_cast<size_t>(toks[t].end) <= off) {
                ++t;
            }
            require(t < toks.size(), "relabeler: piece offset beyond tokenization");
            for (size_t d = 0; d < n_domains; ++d) {
                result[d][j] = anns[d][t];
            }
        }
        return result;
    };
}

template uint64_t params_fingerprint(const ModelConfig&, const ModelParams<float>&);
template uint64_t params_fingerprint(const ModelConfig&, const ModelParams<double>&);
template EvalReport evaluate(const ModelConfig&, const ModelParams<float>&,
                             const std::vector<PackedBatch>&);
template EvalReport evaluate(const ModelConfig&, const ModelParams<double>&,
                             const std::vector<PackedBatch>&);
template CouplingReport coupling_report(const ModelConfig&, const ModelParams<float>&,
                                        const std::vector<PackedBatch>&, const ModelConfig&,
                                        const ModelParams<float>&, const std::vector<PackedBatch>&,
                                        const SubwordVocab&);
template CouplingReport coupling_report(const ModelConfig&, const ModelParams<double>&,
                                        const std::vector<PackedBatch>&, const ModelConfig&,
                                        const ModelParams<double>&, const std::vector<PackedBatch>&,
                                        const SubwordVocab&);
template std::vector<NoisePoint> noise_sweep(const ModelConfig&, const ModelParams<float>&,
                                             const std::vector<Document>&, const Encoder&,
                                             const std::vector<const Annotator*>&,
                                             const std::vector<double>&, uint32_t, uint64_t);
template std::vector<NoisePoint> noise_sweep(const ModelConfig&, const ModelParams<double>&,
                                             const std::vector<Document>&, const Encoder&,
                                             const std::vector<const Annotator*>&,
                                             const std::vector<double>&, uint32_t, uint64_t);
template CausalEvalResult causal_evaluate(const ModelConfig&, const ModelParams<float>&,
                                          const std::vector<Document>&, const Encoder&,
                                          const std::vector<const Annotator*>&, uint32_t);
template CausalEvalResult causal_evaluate(const ModelConfig&, const ModelParams<double>&,
                                          const std::vector<Document>&, const Encoder&,
                                          const std::vector<const Annotator*>&, uint32_t);
template ArithmeticResult arithmetic_steering(const ModelConfig&, const ModelParams<float>&,
                                              const Encoder&,
                                              const std::vector<const Annotator*>&, size_t,
                                              uint64_t);
template ArithmeticResult arithmetic_steering(const ModelConfig&, const ModelParams<double>&,
                                              const Encoder&,
                                              const std::vector<const Annotator*>&, size_t,
                                              uint64_t);
template std::vector<RetrievalPoint> retrieval_eval(const ModelConfig&, const ModelParams<float>&,
                                                    const Encoder&,
                                                    const std::vector<const Annotator*>&,
                                                    const TextGenerator&, const std::vector<int>&,
                                                    size_t, uint64_t);
template std::vector<RetrievalPoint> retrieval_eval(const ModelConfig&, const ModelParams<double>&,
                                                    const Encoder&,
                                                    const std::vector<const Annotator*>&,
                                                    const TextGenerator&, const std::vector<int>&,
                                                    size_t, uint64_t);

}  // namespace lime

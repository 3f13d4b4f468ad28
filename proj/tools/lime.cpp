#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lime/annotate.hpp"
#include "lime/config.hpp"
#include "lime/corpus.hpp"
#include "lime/eval.hpp"
#include "lime/model.hpp"
#include "lime/schema.hpp"
#include "lime/subtok.hpp"
#include "lime/textgen.hpp"

namespace {

using nlohmann::json;
using namespace lime;

struct GlobalArgs {
    std::string config_path;
    std::string seed;
    bool json_out = false;
};

RunConfig resolved_config(const GlobalArgs& g) {
    RunConfig raw;
    if (!g.config_path.empty()) {
        raw = load_config(g.config_path);
    }
    RunConfig cfg = validate_config(raw);
    if (!g.seed.empty()) {
        // an explicit flag beats both the file and the environment override
        cfg.set("run.seed", g.seed);
    }
    return cfg;
}

uint64_t base_seed(const RunConfig& cfg) {
    return static_cast<uint64_t>(cfg.get_i64("run.seed"));
}

// Every random consumer gets its own stream derived from run.seed, so the
// training corpus, the tagger data, and each evaluation stay independent yet
// reproducible.
uint64_t stream_seed(const RunConfig& cfg, std::string_view stream) {
    const uint64_t base = base_seed(cfg);
    return fnv1a64(&base, sizeof(base), fnv1a64(stream.data(), stream.size()));
}

CorpusFormat corpus_format(const RunConfig& cfg) {
    const std::string f = cfg.get_str("corpus.format");
    if (f == "plain") {
        return CorpusFormat::plain_lines;
    }
    if (f == "jsonl") {
        return CorpusFormat::json_lines;
    }
    fail("config: corpus.format must be \"plain\" or \"jsonl\", got \"", f, "\"");
}

std::vector<Document> synthetic_documents(const RunConfig& cfg, std::string_view stream,
                                          size_t count) {
    const DomainSchema pos = pos_schema();
    const DomainSchema ner = ner_schema();
    const TextGenerator gen(pos, ner);
    Rng rng(stream_seed(cfg, stream));
    std::vector<Document> docs(count);
    for (size_t i = 0; i < count; ++i) {
        docs[i].id = i;
        docs[i].text = gen.document(rng);
    }
    return docs;
}

std::vector<Document> train_documents(const RunConfig& cfg) {
    const std::string path = cfg.get_str("corpus.path");
    if (!path.empty()) {
        auto docs = load_documents(path, corpus_format(cfg));
        return split_corpus(docs, cfg.get_f64("corpus.test_fraction"), base_seed(cfg)).train;
    }
    const auto count = static_cast<size_t>(cfg.get_i64("corpus.synthetic_documents"));
    return synthetic_documents(cfg, "train-corpus", count);
}

std::vector<Document> eval_documents(const RunConfig& cfg) {
    const auto cap = static_cast<size_t>(cfg.get_i64("eval.max_documents"));
    const std::string path = cfg.get_str("corpus.path");
    if (!path.empty()) {
        auto docs = load_documents(path, corpus_format(cfg));
        auto split = split_corpus(docs, cfg.get_f64("corpus.test_fraction"), base_seed(cfg));
        if (split.test.empty()) {
            fail("eval corpus: the held-out split of ", path, " is empty");
        }
        if (cap > 0 && split.test.size() > cap) {
            split.test.resize(cap);
        }
        return split.test;
    }
    return synthetic_documents(cfg, "eval-corpus", cap > 0 ? cap : 2000);
}

struct AnnotatorBundle {
    PerceptronTagger tagger;
    RuleNer ner;

    std::vector<const Annotator*> refs() const { return {&tagger, &ner}; }
    std::vector<DomainSchema> domains() const { return {tagger.schema(), ner.schema()}; }
};

AnnotatorBundle load_annotators(const RunConfig& cfg) {
    const std::string tagger_path = cfg.get_str("tagger.path");
    if (tagger_path.empty()) {
        fail("config: tagger.path is empty; train one with `lime train-tagger`");
    }
    const std::string gaz_path = cfg.get_str("gazetteer.path");
    if (gaz_path.empty()) {
        fail("config: gazetteer.path is empty; export one with `lime gen-gazetteer`");
    }
    return AnnotatorBundle{PerceptronTagger::load(tagger_path, pos_schema()),
                           RuleNer(ner_schema(), Gazetteer::from_tsv(gaz_path))};
}

SubwordVocab load_vocab(const RunConfig& cfg) {
    const std::string path = cfg.get_str("vocab.path");
    if (path.empty()) {
        fail("config: vocab.path is empty; train one with `lime train-bpe`");
    }
    return SubwordVocab::load(path);
}

ModelConfig model_config(const RunConfig& cfg, uint32_t vocab_size, const AnnotatorBundle& ann) {
    ModelConfig mc;
    mc.hidden = static_cast<int>(cfg.get_i64("model.hidden"));
    mc.num_layers = static_cast<int>(cfg.get_i64("model.layers"));
    mc.mlp_factor = static_cast<int>(cfg.get_i64("model.mlp_factor"));
    mc.num_heads = static_cast<int>(cfg.get_i64("model.heads"));
    mc.num_kv_heads = static_cast<int>(cfg.get_i64("model.kv_heads"));
    mc.rms_norm_eps = cfg.get_f64("model.rms_norm_eps");
    mc.rotary_base = cfg.get_f64("model.rotary_base");
    mc.seq_len = static_cast<int>(cfg.get_i64("model.seq_len"));
    mc.vocab_size = static_cast<int>(vocab_size);
    mc.mode = fusion_mode_from_name(cfg.get_str("model.mode"));
    mc.domains = ann.domains();
    mc.metadata_head.domain = static_cast<int>(cfg.get_i64("model.metadata_head_domain"));
    mc.metadata_head.loss_weight = cfg.get_f64("model.metadata_head_weight");
    mc.validate();
    return mc;
}

OptimConfig optim_config(const RunConfig& cfg, int64_t total_steps) {
    OptimConfig oc;
    oc.peak_lr = cfg.get_f64("train.peak_lr");
    oc.min_lr = cfg.get_f64("train.min_lr");
    oc.warmup_frac = cfg.get_f64("train.warmup_frac");
    oc.total_steps = total_steps;
    oc.beta1 = cfg.get_f64("train.beta1");
    oc.beta2 = cfg.get_f64("train.beta2");
    oc.eps = cfg.get_f64("train.eps");
    oc.weight_decay = cfg.get_f64("train.weight_decay");
    oc.embed_grad_scale_by_freq = cfg.get_bool("train.embed_grad_scale_by_freq");
    return oc;
}

struct LoadedModel {
    SubwordVocab vocab;
    TrainState<float> state;
};

LoadedModel load_model(const RunConfig& cfg, const std::string& checkpoint) {
    LoadedModel lm{load_vocab(cfg), {}};
    lm.state = load_checkpoint(checkpoint, lm.vocab.fingerprint());
    return lm;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        const size_t end = comma == std::string::npos ? s.size() : comma;
        std::string part = s.substr(start, end - start);
        const size_t a = part.find_first_not_of(" \t");
        const size_t b = part.find_last_not_of(" \t");
        parts.push_back(a == std::string::npos ? std::string() : part.substr(a, b - a + 1));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return parts;
}

std::vector<double> parse_double_list(const std::string& s, std::string_view what) {
    std::vector<double> out;
    for (const auto& part : split_list(s)) {
        if (part.empty()) {
            fail("empty entry in ", what, " list \"", s, "\"");
        }
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            fail("bad number \"", part, "\" in ", what, " list");
        }
        if (used != part.size()) {
            fail("bad number \"", part, "\" in ", what, " list");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s, std::string_view what) {
    std::vector<int> out;
    for (double v : parse_double_list(s, what)) {
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) {
            fail("expected integers in ", what, " list, got \"", s, "\"");
        }
        out.push_back(i);
    }
    return out;
}

// "pos=CD,ner=CARDINAL": one class per named domain; unnamed domains keep -1
// (the look-ahead padding class).
std::vector<int> parse_steer(const std::string& spec, const std::vector<DomainSchema>& domains) {
    if (spec.empty()) {
        return {};
    }
    std::vector<int> steer(domains.size(), -1);
    for (const auto& part : split_list(spec)) {
        const size_t eq = part.find('=');
        if (eq == std::string::npos) {
            fail("steer entry \"", part, "\" is not of the form domain=LABEL");
        }
        const std::string domain = part.substr(0, eq);
        const std::string label = part.substr(eq + 1);
        bool found = false;
        for (size_t d = 0; d < domains.size(); ++d) {
            if (domains[d].name != domain) {
                continue;
            }
            const int cls = domains[d].class_id(label);
            if (cls < 0) {
                fail("domain \"", domain, "\" has no class \"", label, "\"");
            }
            steer[d] = cls;
            found = true;
            break;
        }
        if (!found) {
            fail("model has no metadata domain named \"", domain, "\"");
        }
    }
    return steer;
}

std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

bool is_valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        const size_t before = i;
        const uint32_t cp = decode_utf8(s, i);
        if (cp == 0xFFFD && i == before + 1 && s.substr(before, 3) != "\xEF\xBF\xBD") {
            return false;
        }
    }
    return true;
}

// Pieces are raw bytes; escape anything a terminal or a JSON encoder would
// choke on.
std::string display_piece(std::string_view piece) {
    const bool utf8 = is_valid_utf8(piece);
    std::string out;
    for (const unsigned char c : piece) {
        if (c < 0x20 || c == 0x7F || (!utf8 && c >= 0x80)) {
            char buf[5];
            std::snprintf(buf, sizeof buf, "\\x%02X", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::vector<std::string> split_pieces_field(const std::string& joined) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= joined.size(); ++i) {
        if (i == joined.size() || joined[i] == '\x1F') {
            out.push_back(display_piece(std::string_view(joined).substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

std::string join_pieces_field(const std::string& joined) {
    std::string out;
    for (const auto& p : split_pieces_field(joined)) {
        if (!out.empty()) {
            out += " | ";
        }
        out += p;
    }
    return out;
}

void print_json(const json& j) { std::printf("%s\n", j.dump(2).c_str()); }

json report_json(const EvalReport& r) {
    return json{{"accuracy", r.next_token_accuracy}, {"mean_nll", r.mean_nll},
                {"perplexity", r.perplexity},        {"tokens", r.token_count},
                {"model", hex64(r.model_fingerprint)}, {"mode", fusion_mode_name(r.mode)}};
}

void print_report(const EvalReport& r) {
    std::printf("mode        %s\n", fusion_mode_name(r.mode));
    std::printf("tokens      %llu\n", static_cast<unsigned long long>(r.token_count));
    std::printf("accuracy    %.4f\n", r.next_token_accuracy);
    std::printf("mean nll    %.4f\n", r.mean_nll);
    std::printf("perplexity  %.4f\n", r.perplexity);
    std::printf("model       %s\n", hex64(r.model_fingerprint).c_str());
}

// ----------------------------------------------------------------------------
// Subcommands.
// ----------------------------------------------------------------------------

struct GenCorpusArgs {
    std::string out;
    int64_t count = 0;
    std::string stream = "train-corpus";
};

void cmd_gen_corpus(const GlobalArgs& g, const GenCorpusArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const size_t n = a.count > 0 ? static_cast<size_t>(a.count)
                                 : static_cast<size_t>(cfg.get_i64("corpus.synthetic_documents"));
    const auto docs = synthetic_documents(cfg, a.stream, n);
    std::string text;
    for (const auto& d : docs) {
        text += d.text;
        text += '\n';
    }
    write_file_text(a.out, text);
    if (g.json_out) {
        print_json(json{{"path", a.out}, {"documents", n}, {"bytes", text.size()}});
    } else {
        std::printf("wrote %zu documents (%zu bytes) to %s\n", n, text.size(), a.out.c_str());
    }
}

void cmd_gen_gazetteer(const GlobalArgs& g, const std::string& out) {
    const DomainSchema pos = pos_schema();
    const DomainSchema ner = ner_schema();
    const TextGenerator gen(pos, ner);
    const std::string tsv = gen.gazetteer_tsv();
    if (out.empty()) {
        std::printf("%s", tsv.c_str());
        return;
    }
    write_file_text(out, tsv);
    size_t lines = 0;
    for (const char c : tsv) {
        lines += c == '\n';
    }
    if (g.json_out) {
        print_json(json{{"path", out}, {"entries", lines}});
    } else {
        std::printf("wrote %zu gazetteer entries to %s\n", lines, out.c_str());
    }
}

struct TrainTaggerArgs {
    std::string out;
    int64_t sentences = 0;
    int64_t epochs = 0;
};

void cmd_train_tagger(const GlobalArgs& g, const TrainTaggerArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const size_t n = a.sentences > 0 ? static_cast<size_t>(a.sentences)
                                     : static_cast<size_t>(cfg.get_i64("tagger.sentences"));
    const int epochs = a.epochs > 0 ? static_cast<int>(a.epochs)
                                    : static_cast<int>(cfg.get_i64("tagger.epochs"));
    const DomainSchema pos = pos_schema();
    const DomainSchema ner = ner_schema();
    const TextGenerator gen(pos, ner);
    Rng rng(stream_seed(cfg, "tagger-data"));
    auto sents = gen.tagged_sentences(rng, n);
    require(sents.size() >= 2, "train-tagger: need at least two sentences");
    const size_t held = std::max<size_t>(1, sents.size() / 50);
    const std::vector<TaggedSentence> train(sents.begin(), sents.end() - held);
    const std::vector<TaggedSentence> dev(sents.end() - held, sents.end());
    const PerceptronTagger tagger =
        train_pos_tagger(train, pos, epochs, stream_seed(cfg, "tagger-train"));

    uint64_t hit = 0;
    uint64_t total = 0;
    for (const auto& s : dev) {
        std::vector<std::string_view> surfaces;
        surfaces.reserve(s.size());
        for (const auto& t : s) {
            surfaces.push_back(t.surface);
        }
        const Annotation pred = tagger.annotate_surfaces(surfaces);
        for (size_t i = 0; i < s.size(); ++i) {
            ++total;
            hit += pred[i] == s[i].class_id;
        }
    }
    const double acc = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
    tagger.save(a.out);
    if (g.json_out) {
        print_json(json{{"path", a.out},
                        {"sentences", train.size()},
                        {"epochs", epochs},
                        {"features", tagger.feature_count()},
                        {"held_out_accuracy", acc}});
    } else {
        std::printf("trained on %zu sentences, %d epochs, %zu features\n", train.size(), epochs,
                    tagger.feature_count());
        std::printf("held-out tag accuracy %.4f (%llu tokens)\n", acc,
                    static_cast<unsigned long long>(total));
        std::printf("saved %s\n", a.out.c_str());
    }
}

struct TrainBpeArgs {
    std::string out;
    int64_t vocab_size = 0;
};

void cmd_train_bpe(const GlobalArgs& g, const TrainBpeArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const auto target = a.vocab_size > 0 ? static_cast<uint32_t>(a.vocab_size)
                                         : static_cast<uint32_t>(cfg.get_i64("vocab.size"));
    const auto docs = train_documents(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const SubwordVocab vocab = train_bpe(docs, target);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    vocab.save(a.out);
    if (g.json_out) {
        print_json(json{{"path", a.out},
                        {"documents", docs.size()},
                        {"vocab_size", vocab.size()},
                        {"merges", vocab.merges.size()},
                        {"fingerprint", hex64(vocab.fingerprint())},
                        {"seconds", secs}});
    } else {
        std::printf("trained %u pieces (%zu merges) on %zu documents in %.1fs\n", vocab.size(),
                    vocab.merges.size(), docs.size(), secs);
        std::printf("fingerprint %s\n", hex64(vocab.fingerprint()).c_str());
        std::printf("saved %s\n", a.out.c_str());
    }
}

struct EncodeArgs {
    std::string out;
    bool eval_stream = false;
};

void cmd_encode(const GlobalArgs& g, const EncodeArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const SubwordVocab vocab = load_vocab(cfg);
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = a.eval_stream ? eval_documents(cfg) : train_documents(cfg);
    const Encoder encoder(vocab);
    const auto encoded = encode_documents(docs, encoder, ann.refs());
    uint64_t tokens = 0;
    for (const auto& d : encoded) {
        tokens += d.token_ids.size();
    }
    write_lta(a.out, encoded, vocab.size(), ann.domains());
    if (g.json_out) {
        print_json(json{{"path", a.out}, {"documents", encoded.size()}, {"tokens", tokens}});
    } else {
        std::printf("encoded %zu documents, %llu subword tokens, saved %s\n", encoded.size(),
                    static_cast<unsigned long long>(tokens), a.out.c_str());
    }
}

void cmd_stats(const GlobalArgs& g, int64_t top) {
    const RunConfig cfg = resolved_config(g);
    const SubwordVocab vocab = load_vocab(cfg);
    const auto docs = train_documents(cfg);
    const TokenizationStats st = tokenization_stats(docs, vocab, static_cast<size_t>(top));
    if (g.json_out) {
        json splits = json::array();
        for (const auto& s : st.top_split_sequences) {
            splits.push_back(json{{"plain", split_pieces_field(s.plain)},
                                  {"constrained", split_pieces_field(s.lime)},
                                  {"count", s.count},
                                  {"percent", s.percent}});
        }
        print_json(json{{"constrained_tokens", st.lime_tokens},
                        {"plain_tokens", st.plain_tokens},
                        {"token_inflation", st.token_inflation},
                        {"vocab_usage_delta", st.vocab_usage_delta},
                        {"top_split_sequences", splits}});
        return;
    }
    std::printf("boundary-constrained pieces  %llu\n",
                static_cast<unsigned long long>(st.lime_tokens));
    std::printf("plain reference pieces       %llu\n",
                static_cast<unsigned long long>(st.plain_tokens));
    std::printf("token inflation              %+.4f%%\n", st.token_inflation * 100.0);
    std::printf("vocab usage delta            %+.4f%%\n", st.vocab_usage_delta * 100.0);
    std::printf("top disagreement regions:\n");
    for (const auto& s : st.top_split_sequences) {
        std::printf("  %6.2f%%  %8llux  plain [%s]  constrained [%s]\n", s.percent,
                    static_cast<unsigned long long>(s.count), join_pieces_field(s.plain).c_str(),
                    join_pieces_field(s.lime).c_str());
    }
}

struct TextArgs {
    std::string text;
    std::string input;
    bool causal = false;
    bool no_classes = false;
};

std::string resolve_text(const TextArgs& a) {
    if (!a.text.empty() && !a.input.empty()) {
        fail("pass either --text or --input, not both");
    }
    if (!a.input.empty()) {
        return read_file_text(a.input);
    }
    if (a.text.empty()) {
        fail("pass --text or --input");
    }
    return a.text;
}

void cmd_tokenize(const GlobalArgs& g, const TextArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const SubwordVocab vocab = load_vocab(cfg);
    const Encoder encoder(vocab);
    const std::string text = resolve_text(a);
    const bool with_classes = !a.no_classes && !cfg.get_str("tagger.path").empty();

    if (!with_classes) {
        const auto toks = pretokenize(text);
        const auto ids = encoder.encode_text_linguistic(text, toks, nullptr);
        if (g.json_out) {
            json arr = json::array();
            for (const uint32_t id : ids) {
                arr.push_back(json{{"id", id}, {"piece", display_piece(vocab.pieces[id])}});
            }
            print_json(arr);
            return;
        }
        for (size_t i = 0; i < ids.size(); ++i) {
            std::printf("%4zu  %5u  %s\n", i, ids[i], display_piece(vocab.pieces[ids[i]]).c_str());
        }
        return;
    }

    const AnnotatorBundle ann = load_annotators(cfg);
    const auto pieces = lime_tokenize(text, encoder, ann.refs());
    const auto domains = ann.domains();
    if (g.json_out) {
        json arr = json::array();
        for (const auto& p : pieces) {
            json row{{"id", p.token_id}, {"piece", display_piece(vocab.pieces[p.token_id])}};
            for (size_t d = 0; d < domains.size(); ++d) {
                row[domains[d].name] = domains[d].label(p.class_ids[d]);
            }
            arr.push_back(row);
        }
        print_json(arr);
        return;
    }
    for (size_t i = 0; i < pieces.size(); ++i) {
        const auto& p = pieces[i];
        std::printf("%4zu  %5u  %-16s", i, p.token_id,
                    display_piece(vocab.pieces[p.token_id]).c_str());
        for (size_t d = 0; d < domains.size(); ++d) {
            std::printf("  %-10s", domains[d].label(p.class_ids[d]).c_str());
        }
        std::printf("\n");
    }
}

void cmd_annotate(const GlobalArgs& g, const TextArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const AnnotatorBundle ann = load_annotators(cfg);
    const std::string text = resolve_text(a);
    const auto toks = pretokenize(text);
    std::vector<Annotation> per_domain;
    for (const Annotator* an : ann.refs()) {
        per_domain.push_back(a.causal ? an->annotate_causal(text, toks) : an->annotate(text, toks));
    }
    const auto domains = ann.domains();
    if (g.json_out) {
        json arr = json::array();
        for (size_t i = 0; i < toks.size(); ++i) {
            json row{{"surface", std::string(toks[i].surface(text))}};
            for (size_t d = 0; d < domains.size(); ++d) {
                row[domains[d].name] = domains[d].label(per_domain[d][i]);
            }
            arr.push_back(row);
        }
        print_json(arr);
        return;
    }
    for (size_t i = 0; i < toks.size(); ++i) {
        std::printf("%-20s", std::string(toks[i].surface(text)).c_str());
        for (size_t d = 0; d < domains.size(); ++d) {
            std::printf("  %-10s", domains[d].label(per_domain[d][i]).c_str());
        }
        std::printf("\n");
    }
}

struct TrainArgs {
    std::string out;
    std::string mode;
    int64_t steps = 0;
    int64_t token_budget = 0;
};

void cmd_train(const GlobalArgs& g, const TrainArgs& a) {
    RunConfig cfg = resolved_config(g);
    if (!a.mode.empty()) {
        cfg.set("model.mode", a.mode);
    }
    const SubwordVocab vocab = load_vocab(cfg);
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = train_documents(cfg);
    const Encoder encoder(vocab);
    const auto encoded = encode_documents(docs, encoder, ann.refs());
    const ModelConfig mc = model_config(cfg, vocab.size(), ann);
    const auto batch = static_cast<uint32_t>(cfg.get_i64("train.batch"));
    const auto batches = prepare_batches(encoded, mc, batch);
    if (batches.empty()) {
        fail("training corpus too small: not one full batch of ", std::to_string(batch),
             " windows of ", std::to_string(mc.seq_len + 1), " tokens");
    }

    const int64_t per_step = static_cast<int64_t>(batch) * mc.seq_len;
    int64_t steps = cfg.get_i64("train.steps");
    if (a.token_budget > 0) {
        steps = (a.token_budget + per_step - 1) / per_step;
    }
    if (a.steps > 0) {
        steps = a.steps;
    }
    require(steps > 0, "train: step count must be positive");

    const OptimConfig oc = optim_config(cfg, steps);
    TrainState<float> state = init_train_state<float>(mc, oc, base_seed(cfg), vocab.fingerprint());
    Activations<float> acts;
    ModelParams<float> grads = ModelParams<float>::shaped(mc);

    std::printf("mode %s  params %zu  batches %zu  steps %lld  tokens %lld\n",
                fusion_mode_name(mc.mode), state.params.parameter_count(), batches.size(),
                static_cast<long long>(steps), static_cast<long long>(steps * per_step));
    const int64_t log_every = std::max<int64_t>(1, cfg.get_i64("train.log_every"));
    const auto t0 = std::chrono::steady_clock::now();
    LossValue last{};
    for (int64_t s = 0; s < steps; ++s) {
        const PackedBatch& pb = batches[static_cast<size_t>(state.step) % batches.size()];
        const ModelInput in = to_model_input(pb);
        last = train_step(state, in, acts, grads);
        if ((s + 1) % log_every == 0 || s + 1 == steps) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const double tps = secs > 0 ? static_cast<double>((s + 1) * per_step) / secs : 0.0;
            if (mc.metadata_head.enabled()) {
                std::printf("step %6lld/%lld  loss %.4f  lm %.4f  meta %.4f  lr %.3e  tok/s %.0f\n",
                            static_cast<long long>(s + 1), static_cast<long long>(steps),
                            last.total, last.lm, last.meta, schedule_lr(oc, s), tps);
            } else {
                std::printf("step %6lld/%lld  loss %.4f  lr %.3e  tok/s %.0f\n",
                            static_cast<long long>(s + 1), static_cast<long long>(steps),
                            last.total, schedule_lr(oc, s), tps);
            }
            std::fflush(stdout);
        }
    }
    save_checkpoint(state, a.out);
    const uint64_t fp = params_fingerprint(mc, state.params);
    const size_t meta = state.params.metadata_parameter_count();
    const size_t total = state.params.parameter_count();
    if (g.json_out) {
        print_json(json{{"checkpoint", a.out},
                        {"mode", fusion_mode_name(mc.mode)},
                        {"steps", steps},
                        {"final_loss", last.total},
                        {"parameters", total},
                        {"metadata_parameters", meta},
                        {"model", hex64(fp)}});
    } else {
        std::printf("parameters %zu (metadata %zu, %.3f%%)\n", total, meta,
                    100.0 * static_cast<double>(meta) / static_cast<double>(total));
        std::printf("model %s\n", hex64(fp).c_str());
        std::printf("saved %s\n", a.out.c_str());
    }
}

void cmd_eval(const GlobalArgs& g, const std::string& checkpoint) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = eval_documents(cfg);
    const Encoder encoder(lm.vocab);
    const auto encoded = encode_documents(docs, encoder, ann.refs());
    const auto batch = static_cast<uint32_t>(cfg.get_i64("eval.batch"));
    const auto batches = prepare_batches(encoded, lm.state.config, batch);
    require(!batches.empty(), "eval corpus too small for one batch");
    const EvalReport r = evaluate(lm.state.config, lm.state.params, batches);
    if (g.json_out) {
        print_json(report_json(r));
    } else {
        print_report(r);
    }
}

struct CouplingArgs {
    std::string checkpoint_a;
    std::string checkpoint_b;
    int64_t top = 20;
};

void cmd_coupling(const GlobalArgs& g, const CouplingArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const SubwordVocab vocab = load_vocab(cfg);
    const TrainState<float> sa = load_checkpoint(a.checkpoint_a, vocab.fingerprint());
    const TrainState<float> sb = load_checkpoint(a.checkpoint_b, vocab.fingerprint());
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = eval_documents(cfg);
    const Encoder encoder(vocab);
    const auto encoded = encode_documents(docs, encoder, ann.refs());
    const auto batch = static_cast<uint32_t>(cfg.get_i64("eval.batch"));
    const auto batches_a = prepare_batches(encoded, sa.config, batch);
    const auto batches_b = prepare_batches(encoded, sb.config, batch);
    require(!batches_a.empty(), "eval corpus too small for one batch");
    const CouplingReport r = coupling_report(sa.config, sa.params, batches_a, sb.config, sb.params,
                                             batches_b, vocab);
    if (g.json_out) {
        json rows = json::array();
        for (const auto& row : r.rows) {
            rows.push_back(json{{"token_id", row.token_id},
                                {"piece", display_piece(row.piece)},
                                {"occurrences", row.occurrences},
                                {"accuracy_a", row.accuracy_a},
                                {"accuracy_b", row.accuracy_b},
                                {"impact", row.impact}});
        }
        json buckets = json::array();
        for (const auto& b : r.buckets) {
            buckets.push_back(json{{"pieces", b.pieces},
                                   {"words", b.words},
                                   {"positions_incl", b.positions_incl},
                                   {"positions_excl", b.positions_excl},
                                   {"accuracy_a_incl", b.accuracy_a_incl},
                                   {"accuracy_b_incl", b.accuracy_b_incl},
                                   {"accuracy_a_excl", b.accuracy_a_excl},
                                   {"accuracy_b_excl", b.accuracy_b_excl}});
        }
        print_json(json{{"positions", r.positions},
                        {"accuracy_a", r.accuracy_a},
                        {"accuracy_b", r.accuracy_b},
                        {"delta_accuracy", r.delta_accuracy},
                        {"rows", rows},
                        {"buckets", buckets}});
        return;
    }
    std::printf("positions %llu  accuracy a %.4f  b %.4f  delta %+.4f\n",
                static_cast<unsigned long long>(r.positions), r.accuracy_a, r.accuracy_b,
                r.delta_accuracy);
    std::printf("word-length buckets:\n");
    std::printf("  pieces  words     incl-pos  a(incl) b(incl)    excl-pos  a(excl) b(excl)\n");
    for (const auto& b : r.buckets) {
        std::printf("  %s%-5u %-9llu %-9llu %.4f  %.4f     %-9llu %.4f  %.4f\n",
                    b.pieces == 4 ? ">=" : "  ", b.pieces,
                    static_cast<unsigned long long>(b.words),
                    static_cast<unsigned long long>(b.positions_incl), b.accuracy_a_incl,
                    b.accuracy_b_incl, static_cast<unsigned long long>(b.positions_excl),
                    b.accuracy_a_excl, b.accuracy_b_excl);
    }
    std::printf("top token impacts:\n");
    std::printf("  impact     occurrences  acc_a   acc_b   piece\n");
    const size_t n = std::min<size_t>(r.rows.size(), static_cast<size_t>(a.top));
    for (size_t i = 0; i < n; ++i) {
        const auto& row = r.rows[i];
        std::printf("  %+.5f   %-12llu %.4f  %.4f  %s\n", row.impact,
                    static_cast<unsigned long long>(row.occurrences), row.accuracy_a,
                    row.accuracy_b, display_piece(row.piece).c_str());
    }
}

struct SweepArgs {
    std::string checkpoint;
    std::string levels;
};

void cmd_noise_sweep(const GlobalArgs& g, const SweepArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, a.checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = eval_documents(cfg);
    const Encoder encoder(lm.vocab);
    const std::string spec = a.levels.empty() ? cfg.get_str("eval.noise_levels") : a.levels;
    const auto levels = parse_double_list(spec, "noise level");
    const auto batch = static_cast<uint32_t>(cfg.get_i64("eval.batch"));
    const auto points = noise_sweep(lm.state.config, lm.state.params, docs, encoder, ann.refs(),
                                    levels, batch, stream_seed(cfg, "noise-sweep"));
    if (g.json_out) {
        json arr = json::array();
        for (const auto& p : points) {
            arr.push_back(json{{"p", p.p}, {"report", report_json(p.report)}});
        }
        print_json(arr);
        return;
    }
    std::printf("    p    accuracy  perplexity\n");
    for (const auto& p : points) {
        std::printf("  %.3f  %.4f    %.4f\n", p.p, p.report.next_token_accuracy,
                    p.report.perplexity);
    }
}

void cmd_causal_eval(const GlobalArgs& g, const std::string& checkpoint) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const auto docs = eval_documents(cfg);
    const Encoder encoder(lm.vocab);
    const auto batch = static_cast<uint32_t>(cfg.get_i64("eval.batch"));
    const CausalEvalResult r = causal_evaluate(lm.state.config, lm.state.params, docs, encoder,
                                               ann.refs(), batch);
    if (g.json_out) {
        print_json(json{{"standard", report_json(r.standard)},
                        {"causal", report_json(r.causal)},
                        {"annotation_agreement", r.annotation_agreement}});
        return;
    }
    std::printf("standard    accuracy %.4f  perplexity %.4f\n", r.standard.next_token_accuracy,
                r.standard.perplexity);
    std::printf("causal      accuracy %.4f  perplexity %.4f\n", r.causal.next_token_accuracy,
                r.causal.perplexity);
    std::printf("annotation agreement %.4f\n", r.annotation_agreement);
}

struct ArithArgs {
    std::string checkpoint;
    int64_t instances = 0;
};

void cmd_arith(const GlobalArgs& g, const ArithArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, a.checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const Encoder encoder(lm.vocab);
    const ArithmeticResult r =
        arithmetic_steering(lm.state.config, lm.state.params, encoder, ann.refs(),
                            static_cast<size_t>(a.instances), stream_seed(cfg, "arithmetic"));
    if (g.json_out) {
        print_json(json{{"instances", r.instances},
                        {"unsteered_accuracy", r.unsteered_accuracy},
                        {"steered_accuracy", r.steered_accuracy},
                        {"unsteered_numeric_rate", r.unsteered_numeric_rate},
                        {"steered_numeric_rate", r.steered_numeric_rate}});
        return;
    }
    std::printf("instances           %llu\n", static_cast<unsigned long long>(r.instances));
    std::printf("unsteered accuracy  %.4f\n", r.unsteered_accuracy);
    std::printf("steered accuracy    %.4f\n", r.steered_accuracy);
    std::printf("unsteered numeric   %.4f\n", r.unsteered_numeric_rate);
    std::printf("steered numeric     %.4f\n", r.steered_numeric_rate);
}

struct RetrievalArgs {
    std::string checkpoint;
    std::string levels = "0,60,160,360";
    int64_t instances = 50;
};

void cmd_retrieval(const GlobalArgs& g, const RetrievalArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, a.checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const Encoder encoder(lm.vocab);
    const auto levels = parse_int_list(a.levels, "filler size");
    const DomainSchema pos = pos_schema();
    const DomainSchema ner = ner_schema();
    const TextGenerator gen(pos, ner);
    const auto points =
        retrieval_eval(lm.state.config, lm.state.params, encoder, ann.refs(), gen, levels,
                       static_cast<size_t>(a.instances), stream_seed(cfg, "retrieval"));
    if (g.json_out) {
        json arr = json::array();
        for (const auto& p : points) {
            arr.push_back(json{{"noise_tokens", p.noise_tokens},
                               {"instances", p.instances},
                               {"unsteered_accuracy", p.unsteered_accuracy},
                               {"steered_accuracy", p.steered_accuracy}});
        }
        print_json(arr);
        return;
    }
    std::printf("  filler  instances  unsteered  steered\n");
    for (const auto& p : points) {
        std::printf("  %6d  %9llu  %.4f     %.4f\n", p.noise_tokens,
                    static_cast<unsigned long long>(p.instances), p.unsteered_accuracy,
                    p.steered_accuracy);
    }
}

struct GenerateArgs {
    std::string checkpoint;
    std::string prompt;
    std::string steer;
    int64_t max_steps = 64;
    bool metadata_head = false;
    bool no_stop = false;
};

void cmd_generate(const GlobalArgs& g, const GenerateArgs& a) {
    const RunConfig cfg = resolved_config(g);
    const LoadedModel lm = load_model(cfg, a.checkpoint);
    const AnnotatorBundle ann = load_annotators(cfg);
    const Encoder encoder(lm.vocab);
    const auto toks = pretokenize(a.prompt);
    const auto prompt_ids = encoder.encode_text_linguistic(a.prompt, toks, nullptr);
    require(!prompt_ids.empty(), "generate: the prompt encodes to no tokens");

    GenerateOptions opt;
    opt.max_steps = static_cast<int>(a.max_steps);
    opt.stop_at_separator = !a.no_stop;
    opt.steer = parse_steer(a.steer, lm.state.config.domains);
    opt.use_metadata_head = a.metadata_head;
    const Relabeler relabel = make_relabeler(encoder, ann.refs());
    const auto completion =
        generate_greedy(lm.state.config, lm.state.params, prompt_ids, relabel, opt);
    const std::string text = decode(completion, lm.vocab);
    if (g.json_out) {
        json pieces = json::array();
        for (const uint32_t id : completion) {
            pieces.push_back(json{{"id", id}, {"piece", display_piece(lm.vocab.pieces[id])}});
        }
        print_json(json{{"prompt", a.prompt}, {"completion", text}, {"pieces", pieces}});
        return;
    }
    std::printf("prompt      %s\n", a.prompt.c_str());
    std::printf("completion  %s\n", text.c_str());
}

void cmd_info(const GlobalArgs& g, const std::string& checkpoint) {
    const TrainState<float> st = load_checkpoint(checkpoint);
    const ModelConfig& mc = st.config;
    const size_t total = st.params.parameter_count();
    const size_t meta = st.params.metadata_parameter_count();
    const uint64_t fp = params_fingerprint(mc, st.params);
    if (g.json_out) {
        json domains = json::array();
        for (const auto& d : mc.domains) {
            domains.push_back(json{{"name", d.name}, {"classes", d.size()}, {"weight", d.weight}});
        }
        print_json(json{{"mode", fusion_mode_name(mc.mode)},
                        {"hidden", mc.hidden},
                        {"layers", mc.num_layers},
                        {"heads", mc.num_heads},
                        {"kv_heads", mc.num_kv_heads},
                        {"mlp_factor", mc.mlp_factor},
                        {"seq_len", mc.seq_len},
                        {"vocab_size", mc.vocab_size},
                        {"domains", domains},
                        {"step", st.step},
                        {"learning_rate", schedule_lr(st.optim, st.step)},
                        {"parameters", total},
                        {"metadata_parameters", meta},
                        {"vocab_fingerprint", hex64(st.vocab_fingerprint)},
                        {"model", hex64(fp)}});
        return;
    }
    std::printf("mode        %s\n", fusion_mode_name(mc.mode));
    std::printf("shape       hidden %d, %d layers, %d heads (%d kv), mlp x%d\n", mc.hidden,
                mc.num_layers, mc.num_heads, mc.num_kv_heads, mc.mlp_factor);
    std::printf("seq_len     %d\n", mc.seq_len);
    std::printf("vocab       %d (fingerprint %s)\n", mc.vocab_size,
                hex64(st.vocab_fingerprint).c_str());
    for (const auto& d : mc.domains) {
        std::printf("domain      %s: %u classes, weight %.2f\n", d.name.c_str(), d.size(),
                    d.weight);
    }
    if (mc.metadata_head.enabled()) {
        std::printf("meta head   domain %d, loss weight %.3f\n", mc.metadata_head.domain,
                    mc.metadata_head.loss_weight);
    }
    std::printf("step        %lld (lr %.3e)\n", static_cast<long long>(st.step),
                schedule_lr(st.optim, st.step));
    std::printf("parameters  %zu (metadata %zu, %.3f%%)\n", total, meta,
                100.0 * static_cast<double>(meta) / static_cast<double>(total));
    std::printf("model       %s\n", hex64(fp).c_str());
}

void cmd_config(const GlobalArgs& g) {
    const RunConfig cfg = resolved_config(g);
    if (g.json_out) {
        json j = json::object();
        for (const auto& [k, v] : cfg.values) {
            j[k] = v;
        }
        print_json(j);
        return;
    }
    std::printf("%s", dump_config(cfg).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundary-constrained subword models with metadata embedding fusion"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "run configuration file");
    app.add_option("--seed", g.seed, "override run.seed");
    app.add_flag("--json", g.json_out, "machine-readable output");

    GenCorpusArgs gen_corpus;
    auto* sc = app.add_subcommand("gen-corpus", "write a synthetic document corpus");
    sc->add_option("--out", gen_corpus.out, "output path, one document per line")->required();
    sc->add_option("--count", gen_corpus.count, "documents (default corpus.synthetic_documents)");
    sc->add_option("--stream", gen_corpus.stream, "named random stream (default train-corpus)");
    sc->callback([&] { cmd_gen_corpus(g, gen_corpus); });

    std::string gaz_out;
    sc = app.add_subcommand("gen-gazetteer", "export the entity surface table");
    sc->add_option("--out", gaz_out, "output path (default stdout)");
    sc->callback([&] { cmd_gen_gazetteer(g, gaz_out); });

    TrainTaggerArgs train_tagger;
    sc = app.add_subcommand("train-tagger", "train the part-of-speech tagger");
    sc->add_option("--out", train_tagger.out, "tagger output path")->required();
    sc->add_option("--sentences", train_tagger.sentences, "training sentences");
    sc->add_option("--epochs", train_tagger.epochs, "training epochs");
    sc->callback([&] { cmd_train_tagger(g, train_tagger); });

    TrainBpeArgs train_bpe_args;
    sc = app.add_subcommand("train-bpe", "train the boundary-constrained subword vocabulary");
    sc->add_option("--out", train_bpe_args.out, "vocabulary output path")->required();
    sc->add_option("--vocab-size", train_bpe_args.vocab_size, "target size (default vocab.size)");
    sc->callback([&] { cmd_train_bpe(g, train_bpe_args); });

    EncodeArgs encode_args;
    sc = app.add_subcommand("encode", "encode a corpus to token ids with aligned classes");
    sc->add_option("--out", encode_args.out, "output container path")->required();
    sc->add_flag("--eval", encode_args.eval_stream, "encode the held-out stream instead");
    sc->callback([&] { cmd_encode(g, encode_args); });

    int64_t stats_top = 15;
    sc = app.add_subcommand("stats", "compare against an unconstrained reference tokenizer");
    sc->add_option("--top", stats_top, "disagreement regions to list");
    sc->callback([&] { cmd_stats(g, stats_top); });

    TextArgs tokenize_args;
    sc = app.add_subcommand("tokenize", "show subword pieces and aligned classes for a text");
    sc->add_option("--text", tokenize_args.text, "inline text");
    sc->add_option("--input", tokenize_args.input, "read text from a file");
    sc->add_flag("--no-classes", tokenize_args.no_classes, "pieces only, skip the annotators");
    sc->callback([&] { cmd_tokenize(g, tokenize_args); });

    TextArgs annotate_args;
    sc = app.add_subcommand("annotate", "show linguistic tokens with their classes");
    sc->add_option("--text", annotate_args.text, "inline text");
    sc->add_option("--input", annotate_args.input, "read text from a file");
    sc->add_flag("--causal", annotate_args.causal, "strictly causal annotation");
    sc->callback([&] { cmd_annotate(g, annotate_args); });

    TrainArgs train_args;
    sc = app.add_subcommand("train", "train a model and write a checkpoint");
    sc->add_option("--out", train_args.out, "checkpoint output path")->required();
    sc->add_option("--mode", train_args.mode, "fusion mode: base, lime, lime+1");
    sc->add_option("--steps", train_args.steps, "step count (default train.steps)");
    sc->add_option("--token-budget", train_args.token_budget,
                   "derive the step count from a token budget");
    sc->callback([&] { cmd_train(g, train_args); });

    std::string eval_ckpt;
    sc = app.add_subcommand("eval", "next-token accuracy and perplexity on held-out text");
    sc->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    sc->callback([&] { cmd_eval(g, eval_ckpt); });

    CouplingArgs coupling_args;
    sc = app.add_subcommand("coupling", "per-token accuracy decomposition between two models");
    sc->add_option("--checkpoint-a", coupling_args.checkpoint_a, "baseline checkpoint")
        ->required();
    sc->add_option("--checkpoint-b", coupling_args.checkpoint_b, "comparison checkpoint")
        ->required();
    sc->add_option("--top", coupling_args.top, "token rows to list");
    sc->callback([&] { cmd_coupling(g, coupling_args); });

    SweepArgs sweep_args;
    sc = app.add_subcommand("noise-sweep", "evaluate under annotation corruption");
    sc->add_option("--checkpoint", sweep_args.checkpoint, "model checkpoint")->required();
    sc->add_option("--levels", sweep_args.levels, "corruption rates (default eval.noise_levels)");
    sc->callback([&] { cmd_noise_sweep(g, sweep_args); });

    std::string causal_ckpt;
    sc = app.add_subcommand("causal-eval", "standard versus strictly-causal annotation");
    sc->add_option("--checkpoint", causal_ckpt, "model checkpoint")->required();
    sc->callback([&] { cmd_causal_eval(g, causal_ckpt); });

    ArithArgs arith_args;
    sc = app.add_subcommand("arith", "steered completion of truncated sums");
    sc->add_option("--checkpoint", arith_args.checkpoint, "model checkpoint")->required();
    sc->add_option("--instances", arith_args.instances, "instances (0 = the full operand grid)");
    sc->callback([&] { cmd_arith(g, arith_args); });

    RetrievalArgs retrieval_args;
    sc = app.add_subcommand("retrieval", "steered property retrieval under growing filler");
    sc->add_option("--checkpoint", retrieval_args.checkpoint, "model checkpoint")->required();
    sc->add_option("--levels", retrieval_args.levels, "filler sizes in linguistic tokens");
    sc->add_option("--instances", retrieval_args.instances, "instances per filler size");
    sc->callback([&] { cmd_retrieval(g, retrieval_args); });

    GenerateArgs generate_args;
    sc = app.add_subcommand("generate", "greedy completion with optional class steering");
    sc->add_option("--checkpoint", generate_args.checkpoint, "model checkpoint")->required();
    sc->add_option("--prompt", generate_args.prompt, "prompt text")->required();
    sc->add_option("--steer", generate_args.steer,
                   "classes for the upcoming position, e.g. pos=CD,ner=CARDINAL");
    sc->add_option("--max-steps", generate_args.max_steps, "completion length cap");
    sc->add_flag("--metadata-head", generate_args.metadata_head,
                 "feed the auxiliary head's class prediction back as the look-ahead");
    sc->add_flag("--no-stop", generate_args.no_stop, "keep generating past the separator");
    sc->callback([&] { cmd_generate(g, generate_args); });

    std::string info_ckpt;
    sc = app.add_subcommand("info", "describe a checkpoint");
    sc->add_option("--checkpoint", info_ckpt, "model checkpoint")->required();
    sc->callback([&] { cmd_info(g, info_ckpt); });

    sc = app.add_subcommand("config", "print the resolved configuration");
    sc->callback([&] { cmd_config(g); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const lime::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

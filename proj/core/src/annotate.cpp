#include "lime/annotate.hpp"

#include <algorithm>

namespace lime {

namespace {

std::vector<std::string_view> collect_surfaces(std::string_view text,
                                               const std::vector<LinguisticToken>& tokens) {
    std::vector<std::string_view> surfaces;
    surfaces.reserve(tokens.size());
    for (const auto& t : tokens) {
        surfaces.push_back(t.surface(text));
    }
    return surfaces;
}

std::string lowered(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

// Compressed character-class sketch: X/x/d plus literal punctuation, runs
// collapsed, capped so rare long words share shape features.
std::string word_shape(std::string_view s) {
    std::string shape;
    size_t i = 0;
    while (i < s.size() && shape.size() < 8) {
        const uint32_t cp = decode_utf8(s, i);
        char c;
        if (cp >= 'A' && cp <= 'Z') {
            c = 'X';
        } else if (cp >= 'a' && cp <= 'z') {
            c = 'x';
        } else if (is_digit_cp(cp)) {
            c = 'd';
        } else if (cp < 128) {
            c = static_cast<char>(cp);
        } else if (is_letter_cp(cp)) {
            c = 'x';
        } else {
            c = '*';
        }
        if (shape.empty() || shape.back() != c) {
            shape.push_back(c);
        }
    }
    return shape;
}

}  // namespace

// ---------------------------------------------------------------------------
// PerceptronTagger
// ---------------------------------------------------------------------------

void PerceptronTagger::gather_features(const std::vector<std::string_view>& surfaces, size_t i,
                                       uint16_t prev_tag, bool next_is_boundary,
                                       std::vector<std::string>& out) const {
    const std::string_view cur = surfaces[i];
    const std::string low = lowered(cur);
    out.clear();
    out.push_back("b");
    out.push_back("w=" + std::string(cur));
    out.push_back("l=" + low);
    out.push_back("sh=" + word_shape(cur));
    const size_t n = low.size();
    out.push_back("s1=" + low.substr(n - std::min<size_t>(1, n)));
    out.push_back("s2=" + low.substr(n - std::min<size_t>(2, n)));
    out.push_back("s3=" + low.substr(n - std::min<size_t>(3, n)));
    out.push_back("p1=" + low.substr(0, std::min<size_t>(1, n)));
    const std::string pt = "t-1=" + std::to_string(prev_tag);
    out.push_back(pt);
    out.push_back(pt + "&l=" + low);
    out.push_back("w-1=" + (i > 0 ? lowered(surfaces[i - 1]) : std::string("<s>")));
    out.push_back("w+1=" + (next_is_boundary || i + 1 >= surfaces.size()
                                ? std::string("</s>")
                                : lowered(surfaces[i + 1])));
}

uint16_t PerceptronTagger::predict(const std::vector<std::string>& features) const {
    const size_t k = schema_.classes.size();
    std::vector<double> scores(k, 0.0);
    for (const auto& f : features) {
        const auto it = feature_ids_.find(f);
        if (it == feature_ids_.end()) {
            continue;
        }
        const double* row = weights_.data() + static_cast<size_t>(it->second) * k;
        for (size_t c = 0; c < k; ++c) {
            scores[c] += row[c];
        }
    }
    uint16_t best = 0;
    for (size_t c = 1; c < k; ++c) {
        if (scores[c] > scores[best]) {
            best = static_cast<uint16_t>(c);
        }
    }
    return best;  // strict > keeps ties on the lowest class index
}

Annotation PerceptronTagger::annotate_surfaces(const std::vector<std::string_view>& surfaces) const {
    require(trained(), "tagger has not been trained");
    Annotation out;
    out.reserve(surfaces.size());
    std::vector<std::string> feats;
    uint16_t prev = schema_.special_class;
    for (size_t i = 0; i < surfaces.size(); ++i) {
        gather_features(surfaces, i, prev, false, feats);
        const uint16_t tag = predict(feats);
        out.push_back(tag);
        prev = tag;
    }
    return out;
}

Annotation PerceptronTagger::annotate(std::string_view text,
                                      const std::vector<LinguisticToken>& tokens) const {
    return annotate_surfaces(collect_surfaces(text, tokens));
}

// Strictly causal decode in O(n). Within the prefix 0..=i only the tag of
// token i-1 can differ from the running full-context chain: its next-word
// feature flips from the boundary marker to the real token i. So each step
// retags i-1 with the now-visible next word (that value joins the running
// chain) and predicts i against the boundary.
Annotation PerceptronTagger::annotate_causal(std::string_view text,
                                             const std::vector<LinguisticToken>& tokens) const {
    require(trained(), "tagger has not been trained");
    const auto surfaces = collect_surfaces(text, tokens);
    Annotation causal;
    causal.reserve(surfaces.size());
    std::vector<std::string> feats;
    uint16_t chain_prev = schema_.special_class;  // tag of i-2 in the running chain
    uint16_t boundary_tag = schema_.special_class;
    for (size_t i = 0; i < surfaces.size(); ++i) {
        uint16_t prev_for_i;
        if (i == 0) {
            prev_for_i = schema_.special_class;
        } else {
            gather_features(surfaces, i - 1, chain_prev, false, feats);
            const uint16_t retagged = predict(feats);
            prev_for_i = retagged;
            chain_prev = retagged;
        }
        gather_features(surfaces, i, prev_for_i, true, feats);
        boundary_tag = predict(feats);
        causal.push_back(boundary_tag);
    }
    return causal;
}

PerceptronTagger train_pos_tagger(const std::vector<TaggedSentence>& corpus,
                                  const DomainSchema& schema, int epochs, uint64_t seed) {
    require(!corpus.empty(), "train_pos_tagger: empty corpus");
    require(epochs > 0, "train_pos_tagger: epochs must be positive");
    for (const auto& sent : corpus) {
        for (const auto& tok : sent) {
            require(tok.class_id < schema.classes.size(), "train_pos_tagger: class id out of range");
        }
    }

    PerceptronTagger tagger(schema);
    const size_t k = schema.classes.size();
    std::vector<double> totals;      // accumulated weights for averaging
    std::vector<uint64_t> stamps;    // step of last update, for lazy accumulation
    uint64_t step = 0;

    const auto feature_id = [&](const std::string& f) -> uint32_t {
        auto [it, inserted] = tagger.feature_ids_.try_emplace(f, static_cast<uint32_t>(tagger.feature_ids_.size()));
        if (inserted) {
            tagger.weights_.resize(tagger.feature_ids_.size() * k, 0.0);
            totals.resize(tagger.feature_ids_.size() * k, 0.0);
            stamps.resize(tagger.feature_ids_.size() * k, 0);
        }
        return it->second;
    };
    const auto bump = [&](uint32_t fid, uint16_t cls, double delta) {
        const size_t idx = static_cast<size_t>(fid) * k + cls;
        totals[idx] += static_cast<double>(step - stamps[idx]) * tagger.weights_[idx];
        stamps[idx] = step;
        tagger.weights_[idx] += delta;
    };

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::vector<std::string> feats;
    std::vector<std::string_view> surfaces;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng(seed + static_cast<uint64_t>(epoch));
        rng.shuffle(order);
        for (const size_t si : order) {
            const TaggedSentence& sent = corpus[si];
            surfaces.clear();
            for (const auto& tok : sent) {
                surfaces.push_back(tok.surface);
            }
            uint16_t prev = schema.special_class;
            for (size_t i = 0; i < sent.size(); ++i) {
                ++step;
                tagger.gather_features(surfaces, i, prev, false, feats);
                const uint16_t guess = tagger.predict(feats);
                const uint16_t gold = sent[i].class_id;
                if (guess != gold) {
                    for (const auto& f : feats) {
                        const uint32_t fid = feature_id(f);
                        bump(fid, gold, 1.0);
                        bump(fid, guess, -1.0);
                    }
                }
                prev = gold;  // teacher forcing during training
            }
        }
    }

    // Finish the lazy averages and replace raw weights with them.
    for (size_t idx = 0; idx < tagger.weights_.size(); ++idx) {
        totals[idx] += static_cast<double>(step - stamps[idx]) * tagger.weights_[idx];
        tagger.weights_[idx] = totals[idx] / static_cast<double>(step);
    }
    return tagger;
}

void PerceptronTagger::save(const std::filesystem::path& path) const {
    require(trained(), "cannot save an untrained tagger");
    ByteWriter w;
    w.str("LPT1");
    w.u32(static_cast<uint32_t>(schema_.classes.size()));
    w.u32(static_cast<uint32_t>(feature_ids_.size()));
    std::vector<const std::string*> by_id(feature_ids_.size());
    for (const auto& [feat, fid] : feature_ids_) {
        by_id[fid] = &feat;
    }
    const size_t k = schema_.classes.size();
    for (size_t fid = 0; fid < by_id.size(); ++fid) {
        w.u32(static_cast<uint32_t>(by_id[fid]->size()));
        w.str(*by_id[fid]);
        for (size_t c = 0; c < k; ++c) {
            w.f64(weights_[fid * k + c]);
        }
    }
    write_file_bytes(path, w.bytes);
}

PerceptronTagger PerceptronTagger::load(const std::filesystem::path& path, DomainSchema schema) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    if (r.str(4) != "LPT1") {
        fail("not a tagger file (bad magic): ", path.string());
    }
    const uint32_t k = r.u32();
    require(k == schema.classes.size(), "tagger class count does not match the schema");
    const uint32_t n_features = r.u32();
    PerceptronTagger tagger(std::move(schema));
    tagger.weights_.resize(static_cast<size_t>(n_features) * k);
    for (uint32_t fid = 0; fid < n_features; ++fid) {
        const uint32_t len = r.u32();
        tagger.feature_ids_.emplace(r.str(len), fid);
        for (uint32_t c = 0; c < k; ++c) {
            tagger.weights_[static_cast<size_t>(fid) * k + c] = r.f64();
        }
    }
    return tagger;
}

// ---------------------------------------------------------------------------
// Rule-based NER
// ---------------------------------------------------------------------------

void Gazetteer::add(const std::string& phrase, const std::string& label) {
    const auto toks = pretokenize(phrase);
    Entry entry;
    entry.label = label;
    for (const auto& t : toks) {
        if (t.begin == t.end) {
            continue;  // trailing-whitespace token carries no surface
        }
        entry.surfaces.emplace_back(t.surface(phrase));
    }
    require(!entry.surfaces.empty(), "gazetteer phrase is empty after tokenization");
    by_first_[entry.surfaces.front()].push_back(entries_.size());
    entries_.push_back(std::move(entry));
}

Gazetteer Gazetteer::from_tsv(const std::filesystem::path& path) {
    return from_tsv_text(read_file_text(path));
}

Gazetteer Gazetteer::from_tsv_text(std::string_view text) {
    Gazetteer g;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            fail("gazetteer line ", std::to_string(line_no), " has no tab separator");
        }
        g.add(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
    }
    return g;
}

const std::vector<size_t>* Gazetteer::candidates(std::string_view first_surface) const {
    const auto it = by_first_.find(std::string(first_surface));
    return it == by_first_.end() ? nullptr : &it->second;
}

namespace {

bool is_digit_run(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    size_t i = 0;
    while (i < s.size()) {
        if (!is_digit_cp(decode_utf8(s, i))) {
            return false;
        }
    }
    return true;
}

bool is_currency_symbol(std::string_view s) {
    size_t i = 0;
    if (s.empty()) {
        return false;
    }
    const uint32_t cp = decode_utf8(s, i);
    if (i != s.size()) {
        return false;
    }
    return cp == '$' || cp == 0xA2 || cp == 0xA3 || cp == 0xA5 || cp == 0x20AC;
}

}  // namespace

Annotation annotate_ner(std::string_view text, const std::vector<LinguisticToken>& tokens,
                        const Gazetteer& gazetteer, const DomainSchema& schema) {
    const int none = schema.class_id("''");
    require(none >= 0, "NER schema is missing the no-entity label");
    Annotation out(tokens.size(), static_cast<uint16_t>(none));
    const auto surfaces = collect_surfaces(text, tokens);

    // Longest gazetteer match; left-to-right scan gives the earliest start
    // precedence over any later overlapping candidate.
    size_t i = 0;
    while (i < surfaces.size()) {
        size_t best_len = 0;
        int best_class = -1;
        if (const auto* cands = gazetteer.candidates(surfaces[i])) {
            for (const size_t ei : *cands) {
                const auto& entry = gazetteer.entries()[ei];
                if (entry.surfaces.size() <= best_len || i + entry.surfaces.size() > surfaces.size()) {
                    continue;
                }
                bool all = true;
                for (size_t k = 1; k < entry.surfaces.size(); ++k) {
                    if (surfaces[i + k] != entry.surfaces[k]) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    const int cls = schema.class_id(entry.label);
                    require(cls >= 0, "gazetteer label not in the NER schema");
                    best_len = entry.surfaces.size();
                    best_class = cls;
                }
            }
        }
        if (best_len > 0) {
            for (size_t k = 0; k < best_len; ++k) {
                out[i + k] = static_cast<uint16_t>(best_class);
            }
            i += best_len;
        } else {
            ++i;
        }
    }

    // Pattern rules on tokens the gazetteer left unlabeled.
    const int cardinal = schema.class_id("CARDINAL");
    const int percent = schema.class_id("PERCENT");
    const int money = schema.class_id("MONEY");
    for (size_t j = 0; j < surfaces.size(); ++j) {
        if (out[j] != static_cast<uint16_t>(none)) {
            continue;
        }
        if (is_digit_run(surfaces[j])) {
            if (j + 1 < surfaces.size() && surfaces[j + 1] == "%" &&
                out[j + 1] == static_cast<uint16_t>(none) && percent >= 0) {
                out[j] = static_cast<uint16_t>(percent);
                out[j + 1] = static_cast<uint16_t>(percent);
            } else if (j > 0 && is_currency_symbol(surfaces[j - 1]) &&
                       out[j - 1] == static_cast<uint16_t>(none) && money >= 0) {
                out[j - 1] = static_cast<uint16_t>(money);
                out[j] = static_cast<uint16_t>(money);
            } else if (cardinal >= 0) {
                out[j] = static_cast<uint16_t>(cardinal);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared contracts
// ---------------------------------------------------------------------------

Annotation annotate(std::string_view text, const std::vector<LinguisticToken>& tokens,
                    const DomainSchema& domain, const PerceptronTagger& tagger) {
    require(domain.name == tagger.schema().name, "domain does not match the tagger's schema");
    return tagger.annotate(text, tokens);
}

Annotation inject_noise(const Annotation& ann, double p, const DomainSchema& domain, Rng& rng) {
    require(p >= 0.0 && p <= 1.0, "noise probability must be in [0, 1]");
    Annotation out = ann;
    const uint64_t n_classes = domain.classes.size();
    for (auto& cls : out) {
        if (rng.next_double() < p) {
            cls = static_cast<uint16_t>(rng.next_below(n_classes));
        }
    }
    return out;
}

Annotation Annotator::annotate_causal(std::string_view text,
                                      const std::vector<LinguisticToken>& tokens) const {
    Annotation out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::vector<LinguisticToken> prefix(tokens.begin(), tokens.begin() + static_cast<long>(i) + 1);
        out.push_back(annotate(text, prefix)[i]);
    }
    return out;
}

Annotation annotate_causal(std::string_view text, const std::vector<LinguisticToken>& tokens,
                           const Annotator& annotator) {
    return annotator.annotate_causal(text, tokens);
}

}  // namespace lime

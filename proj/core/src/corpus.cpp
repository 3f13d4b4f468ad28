#include "lime/corpus.hpp"

#include <nlohmann/json.hpp>

#include "lime/common.hpp"

namespace lime {

std::vector<Document> load_documents(const std::filesystem::path& path, CorpusFormat format,
                                     bool skip_malformed) {
    const std::string text = read_file_text(path);
    std::vector<Document> docs;
    uint64_t next_id = 0;
    size_t pos = 0;
    size_t line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (format == CorpusFormat::plain_lines) {
            docs.push_back({next_id++, std::move(line)});
            continue;
        }
        if (line.empty()) {
            continue;  // blank json-lines rows carry no record
        }
        try {
            const auto record = nlohmann::json::parse(line);
            if (!record.contains("text") || !record["text"].is_string()) {
                fail("line ", std::to_string(line_no), ": record has no string \"text\" field");
            }
            docs.push_back({next_id++, record["text"].get<std::string>()});
        } catch (const Error&) {
            if (!skip_malformed) {
                throw;
            }
        } catch (const nlohmann::json::exception& e) {
            if (!skip_malformed) {
                fail("line ", std::to_string(line_no), ": malformed json record: ", e.what());
            }
        }
    }
    return docs;
}

CorpusSplit split_corpus(const std::vector<Document>& docs, double test_fraction, uint64_t seed) {
    require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must be in (0, 1)");
    std::vector<size_t> order(docs.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order);
    const size_t n_test = static_cast<size_t>(static_cast<double>(docs.size()) * test_fraction);
    CorpusSplit split;
    split.empty_test_warning = (n_test == 0);
    for (size_t i = 0; i < order.size(); ++i) {
        (i < n_test ? split.test : split.train).push_back(docs[order[i]]);
    }
    return split;
}

std::vector<PackedBatch> pack_sequences(const std::vector<EncodedDocument>& docs,
                                        const std::vector<DomainSchema>& domains, uint32_t seq_len,
                                        uint32_t batch, ShiftMode shift) {
    require(seq_len >= 2, "pack_sequences: seq_len must be at least 2");
    require(batch >= 1, "pack_sequences: batch must be at least 1");
    const size_t n_domains = domains.size();

    // Concatenated stream with one separator after every document.
    std::vector<uint32_t> stream;
    std::vector<std::vector<uint16_t>> stream_classes(n_domains);
    for (const auto& doc : docs) {
        require(doc.domain_classes.size() == n_domains, "pack_sequences: domain count mismatch");
        stream.insert(stream.end(), doc.token_ids.begin(), doc.token_ids.end());
        stream.push_back(SubwordVocab::kSeparatorId);
        for (size_t d = 0; d < n_domains; ++d) {
            auto& sc = stream_classes[d];
            sc.insert(sc.end(), doc.domain_classes[d].begin(), doc.domain_classes[d].end());
            sc.push_back(domains[d].special_class);
        }
    }

    if (shift == ShiftMode::lookahead) {
        for (size_t d = 0; d < n_domains; ++d) {
            auto& sc = stream_classes[d];
            if (sc.empty()) {
                continue;
            }
            for (size_t i = 0; i + 1 < sc.size(); ++i) {
                sc[i] = sc[i + 1];
            }
            sc.back() = domains[d].x_class;
        }
    }

    const size_t window = static_cast<size_t>(seq_len) + 1;
    const size_t n_windows = stream.size() / window;
    const size_t n_batches = n_windows / batch;

    std::vector<PackedBatch> out;
    out.reserve(n_batches);
    for (size_t b = 0; b < n_batches; ++b) {
        PackedBatch pb;
        pb.batch = batch;
        pb.seq_len = seq_len;
        pb.inputs.reserve(static_cast<size_t>(batch) * seq_len);
        pb.targets.reserve(static_cast<size_t>(batch) * seq_len);
        pb.classes.assign(n_domains, {});
        for (auto& c : pb.classes) {
            c.reserve(static_cast<size_t>(batch) * seq_len);
        }
        for (uint32_t r = 0; r < batch; ++r) {
            const size_t base = (b * batch + r) * window;
            for (uint32_t j = 0; j < seq_len; ++j) {
                pb.inputs.push_back(stream[base + j]);
                pb.targets.push_back(stream[base + j + 1]);
                for (size_t d = 0; d < n_domains; ++d) {
                    pb.classes[d].push_back(stream_classes[d][base + j]);
                }
            }
        }
        out.push_back(std::move(pb));
    }
    return out;
}

}  // namespace lime

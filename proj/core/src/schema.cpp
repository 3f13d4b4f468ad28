#include "lime/schema.hpp"

#include "lime/common.hpp"

namespace lime {

namespace {

const char* const kPosLabels[] = {
    ".",    ",",    "-LRB-", "-RRB-", "``",  "''",  ":",    "$",    "AFX",  "CC",
    "CD",   "DT",   "EX",    "FW",    "HYPH", "IN",  "JJ",   "JJR",  "JJS",  "LS",
    "MD",   "NN",   "NNP",   "NNPS",  "NNS", "PDT", "POS",  "PRP",  "PRP$", "RB",
    "RBR",  "RBS",  "RP",    "TO",    "UH",  "VB",  "VBD",  "VBG",  "VBN",  "VBP",
    "VBZ",  "WDT",  "WP",    "WP$",   "WRB", "SP",  "ADD",  "NFP",  "XX",   "_SP",
    "SPECIAL",
};

const char* const kNerLabels[] = {
    "PERSON", "NORP",     "FAC",   "ORG",      "GPE",      "LOC",      "PRODUCT",
    "EVENT",  "WORK_OF_ART", "LAW", "LANGUAGE", "DATE",     "TIME",     "PERCENT",
    "MONEY",  "QUANTITY", "ORDINAL", "CARDINAL", "''",      "SPECIAL",
};

}  // namespace

int DomainSchema::class_id(const std::string& label) const {
    for (size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == label) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

DomainSchema schema_from_lines(const std::string& name, const std::vector<std::string>& labels,
                               const std::string& x_label, const std::string& special_label,
                               float weight) {
    DomainSchema s;
    s.name = name;
    s.classes = labels;
    s.weight = weight;
    for (size_t i = 0; i < labels.size(); ++i) {
        for (size_t j = i + 1; j < labels.size(); ++j) {
            require(labels[i] != labels[j], "schema labels must be unique");
        }
    }
    const int x = s.class_id(x_label);
    const int sp = s.class_id(special_label);
    require(x >= 0, "schema is missing its look-ahead padding label");
    require(sp >= 0, "schema is missing its SPECIAL label");
    s.x_class = static_cast<uint16_t>(x);
    s.special_class = static_cast<uint16_t>(sp);
    return s;
}

DomainSchema pos_schema() {
    std::vector<std::string> labels(std::begin(kPosLabels), std::end(kPosLabels));
    return schema_from_lines("pos", labels, "XX", "SPECIAL", 1.0f);
}

DomainSchema ner_schema() {
    std::vector<std::string> labels(std::begin(kNerLabels), std::end(kNerLabels));
    return schema_from_lines("ner", labels, "''", "SPECIAL", 1.0f);
}

std::string schema_to_text(const DomainSchema& schema) {
    std::string out;
    for (const auto& label : schema.classes) {
        out += label;
        out += '\n';
    }
    return out;
}

}  // namespace lime

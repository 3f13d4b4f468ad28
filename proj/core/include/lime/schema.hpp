#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lime {

// One metadata domain: an ordered class vocabulary plus the two reserved
// roles (look-ahead padding and the separator/BOS class) and the fusion
// weight. Class ids are indices into `classes`.
struct DomainSchema {
    std::string name;
    std::vector<std::string> classes;
    uint16_t x_class = 0;        // look-ahead padding label
    uint16_t special_class = 0;  // separator/BOS label, never emitted by annotators
    float weight = 1.0f;

    uint16_t size() const { return static_cast<uint16_t>(classes.size()); }
    int class_id(const std::string& label) const;  // -1 when absent
    const std::string& label(uint16_t id) const { return classes.at(id); }
};

// The bundled 51-label part-of-speech schema (Penn-style tag set plus
// whitespace/meta tags). x_class = "XX", special_class = "SPECIAL".
DomainSchema pos_schema();

// The bundled 20-label named-entity schema. "''" (index 18) is the no-entity
// default and doubles as the look-ahead padding class; "SPECIAL" closes the list.
DomainSchema ner_schema();

// Writes `classes` one label per line; reads them back. Used both for the
// shipped data files and for schema blocks inside binary artifacts.
std::string schema_to_text(const DomainSchema& schema);
DomainSchema schema_from_lines(const std::string& name, const std::vector<std::string>& labels,
                               const std::string& x_label, const std::string& special_label,
                               float weight = 1.0f);

using Annotation = std::vector<uint16_t>;  // one class id per linguistic token

}  // namespace lime

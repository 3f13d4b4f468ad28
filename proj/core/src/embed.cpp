#include "lime/embed.hpp"

namespace lime {

const char* fusion_mode_name(FusionMode mode) {
    switch (mode) {
        case FusionMode::BASE:
            return "base";
        case FusionMode::LIME:
            return "lime";
        case FusionMode::LIME_PLUS_ONE:
            return "lime+1";
    }
    fail("fusion_mode_name: invalid mode");
}

FusionMode fusion_mode_from_name(std::string_view name) {
    if (name == "base") return FusionMode::BASE;
    if (name == "lime") return FusionMode::LIME;
    if (name == "lime+1") return FusionMode::LIME_PLUS_ONE;
    fail("unknown fusion mode '", name, "', expected base, lime, or lime+1");
}

Annotation shift_lookahead(const Annotation& ann, const DomainSchema& domain) {
    Annotation out(ann.size());
    if (ann.empty()) {
        return out;
    }
    std::copy(ann.begin() + 1, ann.end(), out.begin());
    require(domain.x_class < domain.size(), "shift_lookahead: x_class outside schema");
    out.back() = domain.x_class;
    return out;
}

}  // namespace lime

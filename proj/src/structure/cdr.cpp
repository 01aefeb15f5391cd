#include <algorithm>
#include <array>

#include "cdrdiff/structure.hpp"

namespace cdrdiff {

namespace {

constexpr std::array<std::pair<CdrTag, std::string_view>, 6> kTagNames = {{
    {CdrTag::H1, "H1"}, {CdrTag::H2, "H2"}, {CdrTag::H3, "H3"},
    {CdrTag::L1, "L1"}, {CdrTag::L2, "L2"}, {CdrTag::L3, "L3"},
}};

}  // namespace

std::string_view cdr_tag_name(CdrTag tag) {
    for (const auto& [t, name] : kTagNames) {
        if (t == tag) return name;
    }
    return "?";
}

CdrTag parse_cdr_tag(std::string_view name) {
    for (const auto& [t, n] : kTagNames) {
        if (n == name) return t;
    }
    throw StructureError("unknown CDR tag '" + std::string(name) + "'");
}

ChainType chain_type_of(CdrTag tag) {
    switch (tag) {
        case CdrTag::H1:
        case CdrTag::H2:
        case CdrTag::H3:
            return ChainType::Heavy;
        default:
            return ChainType::Light;
    }
}

const CdrRange& CdrScheme::range(CdrTag tag) const {
    for (const auto& r : ranges) {
        if (r.tag == tag) return r;
    }
    throw StructureError("scheme " + name + " has no range for " + std::string(cdr_tag_name(tag)));
}

const CdrScheme& chothia_scheme() {
    static const CdrScheme scheme{
        "chothia",
        {
            {CdrTag::H1, {26, ' '}, {32, ' '}},
            {CdrTag::H2, {52, ' '}, {56, ' '}},
            {CdrTag::H3, {95, ' '}, {102, ' '}},
            {CdrTag::L1, {24, ' '}, {34, ' '}},
            {CdrTag::L2, {50, ' '}, {56, ' '}},
            {CdrTag::L3, {89, ' '}, {97, ' '}},
        }};
    return scheme;
}

std::pair<std::size_t, std::size_t> CdrAnnotation::range(CdrTag tag) const {
    if (chain_type_of(tag) != chain_type) {
        throw StructureError(std::string("CDR ") + std::string(cdr_tag_name(tag)) + " requested from a " +
                             (chain_type == ChainType::Heavy ? "heavy" : "light") + " chain");
    }
    for (const auto& [t, r] : ranges) {
        if (t == tag) return r;
    }
    throw StructureError("CDR range empty: no residues numbered inside " + std::string(cdr_tag_name(tag)));
}

CdrAnnotation annotate_cdrs(std::span<const ResidueNumber> numbering, ChainType type, const CdrScheme& scheme) {
    CdrAnnotation out;
    out.scheme = scheme.name;
    out.chain_type = type;
    if (!std::is_sorted(numbering.begin(), numbering.end()) ||
        std::adjacent_find(numbering.begin(), numbering.end()) != numbering.end()) {
        throw StructureError("annotate_cdrs: residue numbering is not strictly increasing");
    }
    ResidueNumber first_start{};
    bool any = false;
    for (const auto& r : scheme.ranges) {
        if (chain_type_of(r.tag) != type) continue;
        if (!any || r.first < first_start) first_start = r.first;
        any = true;
    }
    if (!any) throw StructureError("scheme " + scheme.name + " has no ranges for this chain type");
    if (numbering.empty() || numbering.back() < first_start) {
        throw StructureError("annotate_cdrs: chain shorter than the " + scheme.name + " scheme minimum");
    }
    for (const auto& r : scheme.ranges) {
        if (chain_type_of(r.tag) != type) continue;
        const auto lo = std::lower_bound(numbering.begin(), numbering.end(), r.first);
        const auto hi = std::upper_bound(numbering.begin(), numbering.end(), ResidueNumber{r.last.seq, r.last.icode});
        if (lo < hi) {
            out.ranges.push_back({r.tag,
                                  {static_cast<std::size_t>(lo - numbering.begin()),
                                   static_cast<std::size_t>(hi - numbering.begin())}});
        }
    }
    return out;
}

}  // namespace cdrdiff

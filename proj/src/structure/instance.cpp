#include <algorithm>

#include "cdrdiff/structure.hpp"

namespace cdrdiff {

namespace {

const geom::Vec3* find_atom(std::span<const AtomRecord> atoms, const ResidueRecords& res, std::string_view name) {
    for (std::size_t i : res.atoms) {
        if (atoms[i].name == name) return &atoms[i].position;
    }
    return nullptr;
}

std::vector<ResidueRecords> chain_residues(const std::vector<ResidueRecords>& all, char chain) {
    std::vector<ResidueRecords> out;
    for (const auto& r : all) {
        if (r.chain == chain) out.push_back(r);
    }
    return out;
}

}  // namespace

void refresh_residue_geometry(Residue& residue) {
    residue.frame = geom::frame_from_backbone(residue.n, residue.ca, residue.c);
    if (residue.cb_virtual) residue.cb = geom::ideal_cb(residue.n, residue.ca, residue.c);
}

void place_ideal_backbone(Residue& residue) {
    const auto& ideal = geom::ideal_residue();
    residue.n = residue.ca + residue.frame * ideal.n;
    residue.c = residue.ca + residue.frame * ideal.c;
    residue.o = residue.ca + residue.frame * ideal.o;
    residue.cb = residue.ca + residue.frame * ideal.cb;
    residue.cb_virtual = residue.type == kGlycine;
}

ComplexInstance build_instance(std::span<const AtomRecord> atoms, const ChainSelection& chains, CdrTag cdr,
                               const CdrScheme& scheme) {
    const auto grouped = group_residues(atoms);
    ComplexInstance inst;
    inst.cdr = cdr;

    std::vector<std::pair<char, ChainRole>> order{{chains.heavy, ChainRole::Heavy}};
    if (chains.light) order.push_back({*chains.light, ChainRole::Light});
    for (char a : chains.antigen) order.push_back({a, ChainRole::Antigen});

    const ChainType cdr_chain_type = chain_type_of(cdr);
    const ChainRole cdr_role = cdr_chain_type == ChainType::Heavy ? ChainRole::Heavy : ChainRole::Light;
    bool cdr_chain_found = false;

    for (const auto& [chain_id, role] : order) {
        const auto records = chain_residues(grouped, chain_id);
        if (records.empty()) {
            throw StructureError(std::string("chain '") + chain_id + "' not found in structure");
        }
        std::vector<ResidueNumber> kept_numbers;
        const std::size_t chain_begin = inst.residues.size();
        for (std::size_t pos = 0; pos < records.size(); ++pos) {
            const auto& rec = records[pos];
            const auto type = residue_type_from_name(rec.res_name);
            const geom::Vec3* n = find_atom(atoms, rec, "N");
            const geom::Vec3* ca = find_atom(atoms, rec, "CA");
            const geom::Vec3* c = find_atom(atoms, rec, "C");
            if (!type || !n || !ca || !c) {
                ++inst.dropped_residues;
                continue;
            }
            Residue res;
            res.type = *type;
            res.chain = chain_id;
            res.number = rec.number;
            res.chain_pos = pos;
            res.role = role;
            res.n = *n;
            res.ca = *ca;
            res.c = *c;
            try {
                res.frame = geom::frame_from_backbone(res.n, res.ca, res.c);
            } catch (const geom::GeometryError&) {
                ++inst.dropped_residues;
                continue;
            }
            const geom::Vec3* o = find_atom(atoms, rec, "O");
            res.o = o ? *o : res.ca + res.frame * geom::ideal_residue().o;
            const geom::Vec3* cb = find_atom(atoms, rec, "CB");
            res.cb_virtual = res.type == kGlycine || cb == nullptr;
            res.cb = res.cb_virtual ? geom::ideal_cb(res.n, res.ca, res.c) : *cb;
            inst.residues.push_back(res);
            kept_numbers.push_back(rec.number);
        }
        if (role == cdr_role) {
            cdr_chain_found = true;
            const auto annotation = annotate_cdrs(kept_numbers, cdr_chain_type, scheme);
            const auto [lo, hi] = annotation.range(cdr);
            inst.cdr_begin = chain_begin + lo;
            inst.cdr_end = chain_begin + hi;
        }
    }
    if (!cdr_chain_found) {
        throw StructureError("chain referenced by CDR " + std::string(cdr_tag_name(cdr)) + " is absent");
    }
    if (inst.cdr_end <= inst.cdr_begin) throw StructureError("CDR range empty");
    return inst;
}

std::vector<AtomRecord> instance_atoms(const ComplexInstance& instance) {
    if (instance.residues.empty()) throw StructureError("instance has no residues");
    std::vector<AtomRecord> out;
    int serial = 1;
    for (const auto& r : instance.residues) {
        const auto emit = [&](const char* name, const geom::Vec3& p, const char* element) {
            AtomRecord a;
            a.serial = serial++;
            a.name = name;
            a.res_name = std::string(residue_three_letter(r.type));
            a.chain = r.chain;
            a.res_seq = r.number.seq;
            a.icode = r.number.icode;
            a.position = p;
            a.element = element;
            out.push_back(std::move(a));
        };
        emit("N", r.n, "N");
        emit("CA", r.ca, "C");
        emit("C", r.c, "C");
        emit("O", r.o, "O");
        if (r.type != kGlycine) emit("CB", r.cb, "C");
    }
    return out;
}

}  // namespace cdrdiff

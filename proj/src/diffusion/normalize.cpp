#include "cdrdiff/diffusion.hpp"

namespace cdrdiff::diff {

namespace {

ComplexInstance map_coords(const ComplexInstance& instance, const auto& f) {
    ComplexInstance out = instance;
    for (auto& r : out.residues) {
        r.n = f(r.n);
        r.ca = f(r.ca);
        r.c = f(r.c);
        r.o = f(r.o);
        r.cb = f(r.cb);
    }
    return out;
}

}  // namespace

CoordinateTransform normalization_transform(const ComplexInstance& instance, double scale) {
    if (!(scale > 0.0)) throw DiffusionError("normalization scale must be positive");
    const auto& res = instance.residues;
    if (instance.cdr_end <= instance.cdr_begin || instance.cdr_end > res.size()) {
        throw DiffusionError("instance has no valid CDR range");
    }
    CoordinateTransform tr;
    tr.scale = scale;
    const char chain = res[instance.cdr_begin].chain;
    const bool left = instance.cdr_begin > 0 && res[instance.cdr_begin - 1].chain == chain;
    const bool right = instance.cdr_end < res.size() && res[instance.cdr_end].chain == chain;
    if (left && right) {
        tr.center = 0.5 * (res[instance.cdr_begin - 1].ca + res[instance.cdr_end].ca);
        return tr;
    }
    std::size_t count = 0;
    geom::Vec3 sum = geom::Vec3::Zero();
    for (std::size_t i = 0; i < res.size(); ++i) {
        if (instance.in_cdr(i)) continue;
        sum += res[i].ca;
        ++count;
    }
    if (count == 0) throw DiffusionError("normalization needs at least one context residue");
    tr.center = sum / static_cast<double>(count);
    return tr;
}

ComplexInstance normalize_coords(const ComplexInstance& instance, const CoordinateTransform& tr) {
    return map_coords(instance, [&](const geom::Vec3& p) { return tr.apply(p); });
}

ComplexInstance denormalize_coords(const ComplexInstance& instance, const CoordinateTransform& tr) {
    return map_coords(instance, [&](const geom::Vec3& p) { return tr.invert(p); });
}

DiffusionState clean_state(const ComplexInstance& normalized) {
    DiffusionState s;
    for (std::size_t i = normalized.cdr_begin; i < normalized.cdr_end; ++i) {
        const auto& r = normalized.residues[i];
        s.types.push_back(r.type);
        s.positions.push_back(r.ca);
        s.orientations.push_back(r.frame);
    }
    return s;
}

}  // namespace cdrdiff::diff

/**
 * Synthetic antibody-antigen complexes built from random backbone torsions.
 */

#pragma once

#include <vector>

#include "cdrdiff/rng.hpp"
#include "cdrdiff/structure.hpp"

namespace cdrdiff::testkit {

struct SyntheticSpec {
    /// Heavy-chain numbering range; H3 spans 95-102.
    int heavy_first = 88;
    int heavy_last = 110;
    std::size_t antigen_length = 10;
    /// Distance between the H3 centroid and the antigen centroid.
    double antigen_offset = 10.0;
};

std::vector<AtomRecord> synthetic_atoms(Rng& rng, const SyntheticSpec& spec = {});
ComplexInstance synthetic_complex(Rng& rng, const SyntheticSpec& spec = {});

struct RigidMotion {
    geom::Mat3 rotation = geom::Mat3::Identity();
    geom::Vec3 translation = geom::Vec3::Zero();

    geom::Vec3 apply(const geom::Vec3& p) const { return rotation * p + translation; }
};

RigidMotion random_motion(Rng& rng, double translation_scale = 20.0);
ComplexInstance transformed(const ComplexInstance& instance, const RigidMotion& motion);

}  // namespace cdrdiff::testkit

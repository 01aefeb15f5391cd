/**
 * Noisy state of the generated residues at one diffusion step.
 */

#pragma once

#include <cstddef>
#include <vector>

#include "cdrdiff/geometry.hpp"

namespace cdrdiff {

struct DiffusionState {
    std::vector<int> types;
    /// Ca positions in normalized coordinates.
    std::vector<geom::Vec3> positions;
    std::vector<geom::Mat3> orientations;
    std::size_t t = 0;

    std::size_t size() const { return types.size(); }
};

}  // namespace cdrdiff

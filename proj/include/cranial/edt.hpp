#pragma once

#include <vector>

#include "cranial/volume.hpp"

namespace cranial {

/// Per-voxel values on a grid's geometry (x-fastest), e.g. a distance map.
struct ScalarField {
    Geometry geom;
    std::vector<double> values;

    double at(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return values[static_cast<std::size_t>(geom.linear(x, y, z))];
    }
};

/// Exact squared Euclidean distance (mm^2) from every voxel centre to the
/// nearest foreground voxel centre, using the separable lower-envelope
/// method (x, then y, then z). Each axis pass takes an exact floating-point
/// minimum, so the result equals
///     min over foreground v of  dz^2 + (dy^2 + dx^2)
/// evaluated in that order, where dk = (index difference) * spacing_k.
/// Throws EmptyVolume.
ScalarField edt_squared(const VoxelGrid& g);

/// As edt_squared, with `spacing` substituted for the grid's own (pass
/// {1,1,1} for voxel-unit distances).
ScalarField edt_squared(const VoxelGrid& g, const Vec3& spacing);

/// sqrt of edt_squared, in mm.
ScalarField edt(const VoxelGrid& g);

}  // namespace cranial

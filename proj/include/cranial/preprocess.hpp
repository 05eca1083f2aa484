#pragma once

#include <json.hpp>

#include "cranial/volume.hpp"

namespace cranial {

/// Records a crop + resample so a network output can be put back into the
/// original grid. original_spacing/origin make the inverse exact.
struct GeomTransform {
    Index3 crop_lo{0, 0, 0};
    Index3 original_dims{1, 1, 1};
    Index3 cropped_dims{1, 1, 1};
    Vec3 scale{1.0, 1.0, 1.0};  // target_dims / cropped_dims per axis
    Index3 target_dims{1, 1, 1};
    Vec3 original_spacing{1.0, 1.0, 1.0};
    Vec3 original_origin{0.0, 0.0, 0.0};

    bool operator==(const GeomTransform&) const = default;
};

nlohmann::json to_json(const GeomTransform& t);
GeomTransform transform_from_json(const nlohmann::json& j);

/// Crops to the foreground bounding box grown by margin_vox on each side
/// (clamped to the grid). Centering is realized by the symmetric margin.
std::pair<VoxelGrid, GeomTransform> crop_to_content(const VoxelGrid& g, std::int64_t margin_vox);

/// Nearest-neighbour resample. Output voxel i samples input index
/// floor((i + 0.5) * n_in / n_out), i.e. the mapped centre rounded half-up,
/// clamped to the grid. Spacing is rescaled so the physical extent is kept.
std::pair<VoxelGrid, GeomTransform> resample_nearest(const VoxelGrid& g, const Index3& target_dims);

/// Chains a crop transform with a resample applied to the cropped grid.
GeomTransform compose(const GeomTransform& crop, const GeomTransform& resample);

/// Inverse resample to cropped_dims, then paste at crop_lo into original_dims.
VoxelGrid restore(const VoxelGrid& g, const GeomTransform& t);

/// crop_to_content followed by resample_nearest, with the combined transform.
std::pair<VoxelGrid, GeomTransform> normalize(const VoxelGrid& g, std::int64_t margin_vox, const Index3& target_dims);

}  // namespace cranial

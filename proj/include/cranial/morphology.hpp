#pragma once

#include <cstdint>
#include <vector>

#include "cranial/volume.hpp"

namespace cranial {

/// Euclidean ball: offset o belongs iff |o|_2 <= radius_vox (voxel units).
struct StructuringElement {
    int radius_vox = 1;

    static StructuringElement ball(int r) { return StructuringElement{r}; }
};

/// Ball offsets in z, y, x lexicographic order.
std::vector<Index3> ball_offsets(int radius_vox);

enum class MorphOp { Dilate, Erode, Open, Close };

/// Minkowski dilation/erosion with voxels outside the grid treated as
/// background. Open = erode then dilate; close = dilate then erode.
/// Radii >= 2 go through a thresholded exact EDT; radius 1 uses a direct
/// six-neighbour scan.
VoxelGrid morph(const VoxelGrid& g, MorphOp op, StructuringElement se);

inline VoxelGrid dilate(const VoxelGrid& g, int r) { return morph(g, MorphOp::Dilate, {r}); }
inline VoxelGrid erode(const VoxelGrid& g, int r) { return morph(g, MorphOp::Erode, {r}); }
inline VoxelGrid open(const VoxelGrid& g, int r) { return morph(g, MorphOp::Open, {r}); }
inline VoxelGrid close(const VoxelGrid& g, int r) { return morph(g, MorphOp::Close, {r}); }

namespace reference {

// Serial neighbourhood scans over ball_offsets(r). Slow; kept as the
// baseline for tests and benchmarks.
VoxelGrid dilate_scan(const VoxelGrid& g, int r);
VoxelGrid erode_scan(const VoxelGrid& g, int r);

}  // namespace reference

/// g minus erode(g, 1): foreground voxels with at least one six-connected
/// neighbour that is background or outside the grid.
VoxelGrid boundary(const VoxelGrid& g);

enum class Connectivity { Six = 6, TwentySix = 26 };

struct LabelGrid {
    Geometry geom;
    std::vector<std::int32_t> labels;        // 0 = background, 1..K
    std::vector<std::int64_t> component_sizes;  // component_sizes[k - 1] for label k

    std::int32_t component_count() const { return static_cast<std::int32_t>(component_sizes.size()); }
    std::int32_t at(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return labels[static_cast<std::size_t>(geom.linear(x, y, z))];
    }
};

/// Union-find labelling. Labels are ordered by decreasing size, ties broken by
/// the smallest linear index in the component.
LabelGrid connected_components(const VoxelGrid& g, Connectivity conn);

struct ExtractOptions {
    int open_radius = 1;
    std::int64_t min_component_vox = 10;
};

/// Defect estimate from a full-skull reconstruction:
/// (reconstruction minus defective input), opened with ball(open_radius) when
/// open_radius > 0, then stripped of 26-connected components smaller than
/// min_component_vox.
VoxelGrid extract_defect(const VoxelGrid& reconstruction, const VoxelGrid& defective_input,
                         const ExtractOptions& opts = {});

}  // namespace cranial

#pragma once

#include <cstdint>

#include <json.hpp>

#include "cranial/volume.hpp"

namespace cranial {

/// Procedural stand-in for a healthy skull: a hollow axis-aligned ellipsoidal
/// shell centred in the grid.
struct PhantomConfig {
    Index3 dims{32, 32, 32};
    double axis_frac_min = 0.30;  // radii as a fraction of dims
    double axis_frac_max = 0.45;
    double thickness_frac_min = 0.08;  // shell thickness as a fraction of the radius
    double thickness_frac_max = 0.15;

    void validate() const;
};

nlohmann::json to_json(const PhantomConfig& c);
PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig base = {});

struct PhantomParams {
    Vec3 radii{};
    Vec3 center{};
    double thickness = 0.0;

    /// Widest shell wall in voxels, thickness * max radius.
    double wall_vox() const;
};

constexpr std::uint64_t kMaxPhantomAttempts = 32;

/// Parameters of the phantom generate_phantom(cfg, seed) returns. Draws that
/// rasterize to an empty or disconnected shell are redrawn from sub-seeds
/// derive(seed, {tag("phantom"), attempt}).
PhantomParams phantom_params(const PhantomConfig& cfg, std::uint64_t seed);

/// Voxel v is foreground iff (1 - t)^2 <= sum_i ((v_i - c_i) / r_i)^2 <= 1,
/// always a single 26-connected component. Throws DegenerateConfig when no
/// attempt yields a nonempty connected shell.
VoxelGrid generate_phantom(const PhantomConfig& cfg, std::uint64_t seed);

}  // namespace cranial

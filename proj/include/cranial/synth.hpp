#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cranial/volume.hpp"

namespace cranial {

enum class PatchShape { Cuboid, Ellipsoid };

const char* to_string(PatchShape s);

/// Randomized-defect parameters. Sizes are fractions of the skull bounding
/// box extent; displacement parameters are in voxels.
struct SynthConfig {
    int patch_count_min = 1;
    int patch_count_max = 3;
    std::vector<PatchShape> shape_kinds{PatchShape::Cuboid, PatchShape::Ellipsoid};
    double size_frac_min = 0.10;
    double size_frac_max = 0.30;
    double z_min_frac = 0.4;
    bool deform_enabled = true;
    int control_spacing_vox = 8;
    double max_disp_vox = 6.0;
    double smooth_sigma_vox = 2.0;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const SynthConfig& c);

struct PatchSpec {
    PatchShape shape = PatchShape::Cuboid;
    Index3 center{};
    Vec3 half_extent{};  // voxels

    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const;
};

nlohmann::json to_json(const PatchSpec& p);

struct Patch {
    PatchSpec spec;
    VoxelGrid mask;
};

/// Draws [count_min, count_max] patches: shape uniform over shape_kinds,
/// centre uniform over skull voxels whose height above the bounding-box floor
/// is at least z_min_frac of the box z-extent, per-axis half-extent uniform in
/// [size_frac_min, size_frac_max] times the box extent.
/// Throws EmptyVolume, NoEligibleCenters.
std::vector<Patch> sample_patch_set(const VoxelGrid& skull, const SynthConfig& cfg, std::uint64_t seed);

/// Per-voxel displacement (voxel units), three components interleaved.
struct DisplacementField {
    Index3 dims{1, 1, 1};
    std::vector<double> data;  // size 3 * nx * ny * nz

    std::array<double, 3> at(std::int64_t idx) const {
        const auto i = static_cast<std::size_t>(3 * idx);
        return {data[i], data[i + 1], data[i + 2]};
    }
    double max_abs() const;
};

/// Control lattice points on a grid of spacing control_spacing_vox (an axis
/// collapses to a single point when the spacing reaches its extent), each
/// component uniform in [-max_disp, max_disp], trilinearly interpolated and
/// then smoothed per component by a separable truncated Gaussian
/// (radius ceil(3 sigma)) renormalized over in-bounds taps.
DisplacementField random_displacement_field(const Index3& dims, const SynthConfig& cfg, std::uint64_t seed);

/// Smoothing kernel weights w[0..radius] (symmetric), unnormalized.
std::vector<double> gaussian_half_kernel(double sigma);

/// Backward warp: output(v) = trilinear sample of mask at v + field(v)
/// (outside reads 0), foreground iff the sample >= 0.5.
VoxelGrid warp_mask(const VoxelGrid& mask, const DisplacementField& field);

struct CasePair {
    VoxelGrid defective;
    VoxelGrid defect_gt;
    std::uint64_t seed = 0;
    std::string config_hash;
    int attempt = 0;
    std::vector<PatchSpec> patches;
};

nlohmann::json case_metadata(const CasePair& c);

constexpr int kMaxSynthesisAttempts = 16;

/// Patches (each warped by its own field when deform_enabled) are united and
/// intersected with the skull to form the defect; the defective skull is
/// the remainder. Retries with derived sub-seeds until the defect is
/// nonempty. Throws SynthesisFailed after kMaxSynthesisAttempts.
CasePair synthesize_case(const VoxelGrid& skull, const SynthConfig& cfg, std::uint64_t seed);

}  // namespace cranial

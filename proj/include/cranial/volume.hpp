#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cranial {

using Index3 = std::array<std::int64_t, 3>;
using Vec3 = std::array<double, 3>;

/// Physical placement of a voxel grid. Spacing and origin are in mm.
/// Equality is exact on all fields: grids from one pipeline share provenance.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::int64_t linear(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }
    Index3 coords(std::int64_t idx) const {
        return {idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])};
    }
    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
    }

    bool operator==(const Geometry&) const = default;
};

std::string describe(const Geometry& g);

/// Throws GeometryMismatch naming both geometries unless a == b.
void require_compatible(const Geometry& a, const Geometry& b);

/// Inclusive voxel-index box.
struct BBox {
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};

    Index3 extent() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
    bool operator==(const BBox&) const = default;
};

/// Binary occupancy volume, one bit per voxel, x-fastest.
///
/// Grids are built by their producer through set(); once handed on they are
/// treated as immutable and may be shared freely between threads.
class VoxelGrid {
public:
    VoxelGrid() = default;
    explicit VoxelGrid(const Geometry& geom);
    VoxelGrid(Index3 dims, Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {0.0, 0.0, 0.0});

    /// Any nonzero byte becomes foreground.
    static VoxelGrid from_bytes(const Geometry& geom, std::span<const std::uint8_t> bytes);

    const Geometry& geometry() const { return geom_; }
    const Index3& dims() const { return geom_.dims; }
    const Vec3& spacing() const { return geom_.spacing; }
    const Vec3& origin() const { return geom_.origin; }
    std::int64_t size() const { return geom_.voxel_count(); }

    bool get(std::int64_t idx) const {
        return (words_[static_cast<std::size_t>(idx >> 6)] >> (idx & 63)) & 1u;
    }
    bool at(std::int64_t x, std::int64_t y, std::int64_t z) const { return get(geom_.linear(x, y, z)); }
    /// Out-of-bounds coordinates read as background.
    bool at_or_zero(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return geom_.contains(x, y, z) && at(x, y, z);
    }

    void set(std::int64_t idx, bool value) {
        auto& w = words_[static_cast<std::size_t>(idx >> 6)];
        const std::uint64_t bit = std::uint64_t{1} << (idx & 63);
        w = value ? (w | bit) : (w & ~bit);
    }
    void set(std::int64_t x, std::int64_t y, std::int64_t z, bool value) { set(geom_.linear(x, y, z), value); }

    std::int64_t foreground_count() const;
    bool empty() const { return foreground_count() == 0; }

    std::vector<std::uint8_t> to_bytes() const;
    /// Linear indices of all foreground voxels in increasing order.
    std::vector<std::int64_t> foreground_indices() const;

    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    /// Same geometry, with every voxel flipped.
    VoxelGrid complement() const;
    /// Same data, geometry replaced (dims must agree).
    VoxelGrid with_geometry(const Geometry& geom) const;

    /// Bitwise data equality plus exact geometry equality.
    bool operator==(const VoxelGrid& other) const;

private:
    void clear_tail();

    Geometry geom_{};
    std::vector<std::uint64_t> words_;
};

enum class BoolOp { Union, Intersect, Subtract };

/// Per-voxel OR / AND / AND-NOT. Geometry is taken from a.
VoxelGrid boolean_op(const VoxelGrid& a, const VoxelGrid& b, BoolOp kind);

inline VoxelGrid unite(const VoxelGrid& a, const VoxelGrid& b) { return boolean_op(a, b, BoolOp::Union); }
inline VoxelGrid intersect(const VoxelGrid& a, const VoxelGrid& b) { return boolean_op(a, b, BoolOp::Intersect); }
inline VoxelGrid subtract(const VoxelGrid& a, const VoxelGrid& b) { return boolean_op(a, b, BoolOp::Subtract); }

/// Tightest box around all foreground voxels. Throws EmptyVolume.
BBox bounding_box(const VoxelGrid& g);

/// Sub-grid [box.lo, box.hi]; origin moves so retained voxels keep their physical position.
VoxelGrid crop(const VoxelGrid& g, const BBox& box);
/// Pastes src into a zero grid with `geom`, src voxel (0,0,0) landing at `offset`.
VoxelGrid paste(const VoxelGrid& src, const Geometry& geom, const Index3& offset);

// ---------------------------------------------------------------------------
// File I/O
//
// .mha  MetaImage subset: ASCII header then nx*ny*nz MET_UCHAR bytes.
// .bin  one byte/voxel, with a <name>.json sidecar holding dims/spacing/origin.

void write_mha(const VoxelGrid& g, const std::filesystem::path& path);
VoxelGrid read_mha(const std::filesystem::path& path);
VoxelGrid parse_mha(std::span<const char> contents);

/// `path` may name either the .bin payload or the .json sidecar.
void write_raw(const VoxelGrid& g, const std::filesystem::path& path);
VoxelGrid read_raw(const std::filesystem::path& path);

/// Dispatches on extension (.mha, otherwise raw pair).
void write_volume(const VoxelGrid& g, const std::filesystem::path& path);
VoxelGrid read_volume(const std::filesystem::path& path);

/// 64-bit FNV-1a over geometry and data bits; used for provenance and dedup.
std::uint64_t content_hash(const VoxelGrid& g);

}  // namespace cranial

#include "cranial/volume.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "cranial/error.hpp"

namespace cranial {

std::string describe(const Geometry& g) {
    std::ostringstream os;
    os.precision(17);
    os << "dims=(" << g.dims[0] << "," << g.dims[1] << "," << g.dims[2] << ") spacing=(" << g.spacing[0] << ","
       << g.spacing[1] << "," << g.spacing[2] << ") origin=(" << g.origin[0] << "," << g.origin[1] << ","
       << g.origin[2] << ")";
    return os.str();
}

void require_compatible(const Geometry& a, const Geometry& b) {
    if (!(a == b)) {
        throw Error(ErrorKind::GeometryMismatch, describe(a) + " vs " + describe(b));
    }
}

namespace {

void validate(const Geometry& g) {
    for (int i = 0; i < 3; ++i) {
        if (g.dims[i] <= 0) throw Error(ErrorKind::DimensionError, "dims must be positive: " + describe(g));
        if (!(g.spacing[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be > 0: " + describe(g));
    }
}

std::size_t word_count(std::int64_t n) { return static_cast<std::size_t>((n + 63) / 64); }

}  // namespace

VoxelGrid::VoxelGrid(const Geometry& geom) : geom_(geom) {
    validate(geom_);
    words_.assign(word_count(geom_.voxel_count()), 0);
}

VoxelGrid::VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin) : VoxelGrid(Geometry{dims, spacing, origin}) {}

VoxelGrid VoxelGrid::from_bytes(const Geometry& geom, std::span<const std::uint8_t> bytes) {
    VoxelGrid g(geom);
    if (static_cast<std::int64_t>(bytes.size()) != g.size()) {
        throw Error(ErrorKind::DimensionError, "expected " + std::to_string(g.size()) + " voxels, got " +
                                                   std::to_string(bytes.size()));
    }
    const std::int64_t n = g.size();
    for (std::int64_t w = 0; w < static_cast<std::int64_t>(g.words_.size()); ++w) {
        std::uint64_t word = 0;
        const std::int64_t base = w * 64;
        const std::int64_t end = std::min<std::int64_t>(64, n - base);
        for (std::int64_t b = 0; b < end; ++b) {
            word |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(base + b)] != 0) << b;
        }
        g.words_[static_cast<std::size_t>(w)] = word;
    }
    return g;
}

std::int64_t VoxelGrid::foreground_count() const {
    std::int64_t count = 0;
    for (auto w : words_) count += std::popcount(w);
    return count;
}

std::vector<std::uint8_t> VoxelGrid::to_bytes() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(size()));
    for (std::int64_t i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = get(i) ? 1 : 0;
    return out;
}

std::vector<std::int64_t> VoxelGrid::foreground_indices() const {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(foreground_count()));
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t word = words_[w];
        while (word != 0) {
            const int b = std::countr_zero(word);
            out.push_back(static_cast<std::int64_t>(w) * 64 + b);
            word &= word - 1;
        }
    }
    return out;
}

void VoxelGrid::clear_tail() {
    const std::int64_t rem = size() % 64;
    if (rem != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << rem) - 1;
}

VoxelGrid VoxelGrid::complement() const {
    VoxelGrid out = *this;
    for (auto& w : out.words_) w = ~w;
    out.clear_tail();
    return out;
}

VoxelGrid VoxelGrid::with_geometry(const Geometry& geom) const {
    if (geom.dims != geom_.dims) {
        throw Error(ErrorKind::DimensionError, "with_geometry: " + describe(geom) + " vs " + describe(geom_));
    }
    validate(geom);
    VoxelGrid out = *this;
    out.geom_ = geom;
    return out;
}

bool VoxelGrid::operator==(const VoxelGrid& other) const {
    return geom_ == other.geom_ && words_ == other.words_;
}

VoxelGrid boolean_op(const VoxelGrid& a, const VoxelGrid& b, BoolOp kind) {
    require_compatible(a.geometry(), b.geometry());
    VoxelGrid out(a.geometry());
    auto dst = out.words();
    auto wa = a.words();
    auto wb = b.words();
    const auto n = static_cast<std::int64_t>(dst.size());
#pragma omp parallel for schedule(static) if (n > 4096)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        switch (kind) {
            case BoolOp::Union: dst[k] = wa[k] | wb[k]; break;
            case BoolOp::Intersect: dst[k] = wa[k] & wb[k]; break;
            case BoolOp::Subtract: dst[k] = wa[k] & ~wb[k]; break;
        }
    }
    return out;
}

BBox bounding_box(const VoxelGrid& g) {
    const auto& d = g.dims();
    BBox box{{d[0], d[1], d[2]}, {-1, -1, -1}};
    bool any = false;
    for (std::int64_t idx : g.foreground_indices()) {
        const Index3 c = g.geometry().coords(idx);
        for (int i = 0; i < 3; ++i) {
            box.lo[i] = std::min(box.lo[i], c[i]);
            box.hi[i] = std::max(box.hi[i], c[i]);
        }
        any = true;
    }
    if (!any) throw Error(ErrorKind::EmptyVolume, "bounding_box of empty grid " + describe(g.geometry()));
    return box;
}

VoxelGrid crop(const VoxelGrid& g, const BBox& box) {
    const auto& d = g.dims();
    for (int i = 0; i < 3; ++i) {
        if (box.lo[i] < 0 || box.hi[i] >= d[i] || box.lo[i] > box.hi[i]) {
            throw Error(ErrorKind::DimensionError, "crop box outside grid " + describe(g.geometry()));
        }
    }
    Geometry geom = g.geometry();
    geom.dims = box.extent();
    for (int i = 0; i < 3; ++i) geom.origin[i] = g.origin()[i] + static_cast<double>(box.lo[i]) * g.spacing()[i];
    VoxelGrid out(geom);
    for (std::int64_t z = 0; z < geom.dims[2]; ++z)
        for (std::int64_t y = 0; y < geom.dims[1]; ++y)
            for (std::int64_t x = 0; x < geom.dims[0]; ++x)
                if (g.at(x + box.lo[0], y + box.lo[1], z + box.lo[2])) out.set(x, y, z, true);
    return out;
}

VoxelGrid paste(const VoxelGrid& src, const Geometry& geom, const Index3& offset) {
    VoxelGrid out(geom);
    const auto& s = src.dims();
    for (std::int64_t z = 0; z < s[2]; ++z)
        for (std::int64_t y = 0; y < s[1]; ++y)
            for (std::int64_t x = 0; x < s[0]; ++x) {
                if (!src.at(x, y, z)) continue;
                const std::int64_t tx = x + offset[0], ty = y + offset[1], tz = z + offset[2];
                if (!geom.contains(tx, ty, tz)) {
                    throw Error(ErrorKind::DimensionError, "paste places foreground outside " + describe(geom));
                }
                out.set(tx, ty, tz, true);
            }
    return out;
}

std::uint64_t content_hash(const VoxelGrid& g) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    const auto& geom = g.geometry();
    for (int i = 0; i < 3; ++i) mix(static_cast<std::uint64_t>(geom.dims[i]));
    for (int i = 0; i < 3; ++i) mix(std::bit_cast<std::uint64_t>(geom.spacing[i]));
    for (int i = 0; i < 3; ++i) mix(std::bit_cast<std::uint64_t>(geom.origin[i]));
    for (auto w : g.words()) mix(w);
    return h;
}

}  // namespace cranial

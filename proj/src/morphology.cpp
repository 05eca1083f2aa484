#include "cranial/morphology.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include "cranial/edt.hpp"
#include "cranial/error.hpp"

namespace cranial {

std::vector<Index3> ball_offsets(int r) {
    std::vector<Index3> out;
    const std::int64_t r2 = static_cast<std::int64_t>(r) * r;
    for (std::int64_t z = -r; z <= r; ++z)
        for (std::int64_t y = -r; y <= r; ++y)
            for (std::int64_t x = -r; x <= r; ++x)
                if (x * x + y * y + z * z <= r2) out.push_back({x, y, z});
    return out;
}

namespace reference {

VoxelGrid dilate_scan(const VoxelGrid& g, int r) {
    const auto offsets = ball_offsets(r);
    VoxelGrid out(g.geometry());
    const auto& d = g.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                bool hit = false;
                for (const auto& o : offsets) {
                    if (g.at_or_zero(x + o[0], y + o[1], z + o[2])) {
                        hit = true;
                        break;
                    }
                }
                if (hit) out.set(x, y, z, true);
            }
    return out;
}

VoxelGrid erode_scan(const VoxelGrid& g, int r) {
    const auto offsets = ball_offsets(r);
    VoxelGrid out(g.geometry());
    const auto& d = g.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                bool keep = true;
                for (const auto& o : offsets) {
                    if (!g.at_or_zero(x + o[0], y + o[1], z + o[2])) {
                        keep = false;
                        break;
                    }
                }
                if (keep) out.set(x, y, z, true);
            }
    return out;
}

}  // namespace reference

namespace {

constexpr std::int64_t kSix[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

// Radius-1 ball is the centre plus its six face neighbours.
VoxelGrid six_scan(const VoxelGrid& g, bool dilate) {
    const auto& d = g.dims();
    const auto bytes = g.to_bytes();
    std::vector<std::uint8_t> res(bytes.size());
    const std::int64_t nx = d[0], ny = d[1], nz = d[2];
#pragma omp parallel for schedule(static)
    for (std::int64_t z = 0; z < nz; ++z) {
        for (std::int64_t y = 0; y < ny; ++y) {
            for (std::int64_t x = 0; x < nx; ++x) {
                const std::int64_t idx = x + nx * (y + ny * z);
                bool v = bytes[static_cast<std::size_t>(idx)] != 0;
                for (const auto& o : kSix) {
                    const std::int64_t xx = x + o[0], yy = y + o[1], zz = z + o[2];
                    const bool inside = xx >= 0 && yy >= 0 && zz >= 0 && xx < nx && yy < ny && zz < nz;
                    const bool nb = inside && bytes[static_cast<std::size_t>(xx + nx * (yy + ny * zz))] != 0;
                    if (dilate) {
                        v = v || nb;
                    } else {
                        v = v && nb;
                    }
                }
                res[static_cast<std::size_t>(idx)] = v ? 1 : 0;
            }
        }
    }
    return VoxelGrid::from_bytes(g.geometry(), res);
}

VoxelGrid dilate_edt(const VoxelGrid& g, int r) {
    if (g.empty()) return VoxelGrid(g.geometry());
    const auto dist = edt_squared(g, {1.0, 1.0, 1.0});
    const double r2 = static_cast<double>(r) * r;
    std::vector<std::uint8_t> res(dist.values.size());
    const auto n = static_cast<std::int64_t>(res.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        res[static_cast<std::size_t>(i)] = dist.values[static_cast<std::size_t>(i)] <= r2 ? 1 : 0;
    }
    return VoxelGrid::from_bytes(g.geometry(), res);
}

VoxelGrid erode_edt(const VoxelGrid& g, int r) {
    // Distance to the nearest background voxel on a domain padded by r, so
    // voxels within r of the border see the outside as background.
    const auto& d = g.dims();
    Geometry padded_geom;
    padded_geom.dims = {d[0] + 2 * r, d[1] + 2 * r, d[2] + 2 * r};
    VoxelGrid background(padded_geom);
    for (std::int64_t z = 0; z < padded_geom.dims[2]; ++z)
        for (std::int64_t y = 0; y < padded_geom.dims[1]; ++y)
            for (std::int64_t x = 0; x < padded_geom.dims[0]; ++x)
                if (!g.at_or_zero(x - r, y - r, z - r)) background.set(x, y, z, true);
    const auto dist = edt_squared(background, {1.0, 1.0, 1.0});
    const double r2 = static_cast<double>(r) * r;
    std::vector<std::uint8_t> res(static_cast<std::size_t>(g.size()));
#pragma omp parallel for schedule(static)
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x)
                res[static_cast<std::size_t>(x + d[0] * (y + d[1] * z))] =
                    dist.at(x + r, y + r, z + r) > r2 ? 1 : 0;
    return VoxelGrid::from_bytes(g.geometry(), res);
}

VoxelGrid dilate_impl(const VoxelGrid& g, int r) {
    if (r == 0) return g;
    return r == 1 ? six_scan(g, true) : dilate_edt(g, r);
}

VoxelGrid erode_impl(const VoxelGrid& g, int r) {
    if (r == 0) return g;
    return r == 1 ? six_scan(g, false) : erode_edt(g, r);
}

}  // namespace

VoxelGrid morph(const VoxelGrid& g, MorphOp op, StructuringElement se) {
    if (se.radius_vox < 0) throw Error(ErrorKind::InvalidArgument, "structuring element radius must be >= 0");
    const int r = se.radius_vox;
    switch (op) {
        case MorphOp::Dilate: return dilate_impl(g, r);
        case MorphOp::Erode: return erode_impl(g, r);
        case MorphOp::Open: return dilate_impl(erode_impl(g, r), r);
        case MorphOp::Close: return erode_impl(dilate_impl(g, r), r);
    }
    return g;
}

VoxelGrid boundary(const VoxelGrid& g) { return subtract(g, erode_impl(g, 1)); }

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::int64_t find(std::int64_t i) {
        while (parent_[static_cast<std::size_t>(i)] != i) {
            auto& p = parent_[static_cast<std::size_t>(i)];
            p = parent_[static_cast<std::size_t>(p)];
            i = p;
        }
        return i;
    }

    // Root is always the smaller index, so each root is its component's minimum.
    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) {
            parent_[static_cast<std::size_t>(b)] = a;
        } else {
            parent_[static_cast<std::size_t>(a)] = b;
        }
    }

private:
    std::vector<std::int64_t> parent_;
};

}  // namespace

LabelGrid connected_components(const VoxelGrid& g, Connectivity conn) {
    const auto& geom = g.geometry();
    LabelGrid out{geom, std::vector<std::int32_t>(static_cast<std::size_t>(g.size()), 0), {}};
    const auto fg = g.foreground_indices();
    if (fg.empty()) return out;

    // Backward half-neighbourhood: each pair is visited once.
    std::vector<Index3> back;
    for (std::int64_t z = -1; z <= 0; ++z)
        for (std::int64_t y = -1; y <= 1; ++y)
            for (std::int64_t x = -1; x <= 1; ++x) {
                if (z == 0 && (y > 0 || (y == 0 && x >= 0))) continue;
                const std::int64_t manhattan = std::abs(x) + std::abs(y) + std::abs(z);
                if (conn == Connectivity::Six && manhattan != 1) continue;
                back.push_back({x, y, z});
            }

    DisjointSets sets(static_cast<std::size_t>(g.size()));
    for (std::int64_t idx : fg) {
        const Index3 c = geom.coords(idx);
        for (const auto& o : back) {
            const std::int64_t x = c[0] + o[0], y = c[1] + o[1], z = c[2] + o[2];
            if (geom.contains(x, y, z) && g.at(x, y, z)) sets.unite(idx, geom.linear(x, y, z));
        }
    }

    // Roots in increasing index order; count sizes then rank.
    std::vector<std::int64_t> roots;
    std::vector<std::int64_t> root_of(fg.size());
    std::vector<std::int64_t> size_by_root(static_cast<std::size_t>(g.size()), 0);
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const std::int64_t r = sets.find(fg[i]);
        root_of[i] = r;
        if (size_by_root[static_cast<std::size_t>(r)]++ == 0) roots.push_back(r);
    }
    std::stable_sort(roots.begin(), roots.end(), [&](std::int64_t a, std::int64_t b) {
        return size_by_root[static_cast<std::size_t>(a)] > size_by_root[static_cast<std::size_t>(b)];
    });
    std::vector<std::int32_t> label_of_root(static_cast<std::size_t>(g.size()), 0);
    out.component_sizes.reserve(roots.size());
    for (std::size_t k = 0; k < roots.size(); ++k) {
        label_of_root[static_cast<std::size_t>(roots[k])] = static_cast<std::int32_t>(k + 1);
        out.component_sizes.push_back(size_by_root[static_cast<std::size_t>(roots[k])]);
    }
    for (std::size_t i = 0; i < fg.size(); ++i) {
        out.labels[static_cast<std::size_t>(fg[i])] = label_of_root[static_cast<std::size_t>(root_of[i])];
    }
    return out;
}

VoxelGrid extract_defect(const VoxelGrid& reconstruction, const VoxelGrid& defective_input,
                         const ExtractOptions& opts) {
    require_compatible(reconstruction.geometry(), defective_input.geometry());
    VoxelGrid diff = subtract(reconstruction, defective_input);
    if (opts.open_radius > 0) diff = open(diff, opts.open_radius);
    if (opts.min_component_vox <= 1) return diff;
    const auto labels = connected_components(diff, Connectivity::TwentySix);
    VoxelGrid out(diff.geometry());
    for (std::int64_t i = 0; i < diff.size(); ++i) {
        const auto l = labels.labels[static_cast<std::size_t>(i)];
        if (l > 0 && labels.component_sizes[static_cast<std::size_t>(l - 1)] >= opts.min_component_vox) {
            out.set(i, true);
        }
    }
    return out;
}

}  // namespace cranial

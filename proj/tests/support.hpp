#pragma once

// Independent oracles and generators shared by the test binaries. Nothing in
// here calls the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "cranial/rng.hpp"
#include "cranial/volume.hpp"

namespace oracle {

using cranial::Geometry;
using cranial::Index3;
using cranial::Rng;
using cranial::Vec3;
using cranial::VoxelGrid;

inline Index3 random_dims(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return {rng.uniform_int(lo, hi), rng.uniform_int(lo, hi), rng.uniform_int(lo, hi)};
}

inline Vec3 random_spacing(Rng& rng) { return {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)}; }

/// Independent Bernoulli voxels.
inline VoxelGrid noise_mask(Rng& rng, const Geometry& g, double density) {
    VoxelGrid m(g);
    for (std::int64_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < density);
    return m;
}

/// Union of random balls, for masks with structure that survives erosion.
inline VoxelGrid blob_mask(Rng& rng, const Geometry& g, int balls) {
    VoxelGrid m(g);
    const auto& d = g.dims;
    for (int b = 0; b < balls; ++b) {
        const double cx = rng.uniform(0, double(d[0])), cy = rng.uniform(0, double(d[1])),
                     cz = rng.uniform(0, double(d[2]));
        const double r = rng.uniform(1.0, 0.35 * double(std::min({d[0], d[1], d[2]})) + 1.0);
        for (std::int64_t z = 0; z < d[2]; ++z)
            for (std::int64_t y = 0; y < d[1]; ++y)
                for (std::int64_t x = 0; x < d[0]; ++x) {
                    const double dx = double(x) - cx, dy = double(y) - cy, dz = double(z) - cz;
                    if (dx * dx + dy * dy + dz * dz <= r * r) m.set(x, y, z, true);
                }
    }
    return m;
}

/// Squared distance between two voxel centres, summed z + (y + x).
inline double sq_dist(const Vec3& sp, const Index3& a, const Index3& b) {
    double t[3];
    for (int i = 0; i < 3; ++i) {
        const double u = double(a[i] - b[i]) * sp[i];
        t[i] = u * u;
    }
    return t[2] + (t[1] + t[0]);
}

inline std::vector<Index3> foreground(const VoxelGrid& g) {
    std::vector<Index3> out;
    const auto& d = g.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x)
                if (g.at(x, y, z)) out.push_back({x, y, z});
    return out;
}

/// O(n^2) squared EDT.
inline std::vector<double> edt_squared(const VoxelGrid& g, const Vec3& sp) {
    const auto fg = foreground(g);
    const auto& d = g.dims();
    std::vector<double> out;
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& f : fg) best = std::min(best, sq_dist(sp, {x, y, z}, f));
                out.push_back(best);
            }
    return out;
}

/// Foreground voxels with a six-neighbour that is background or outside.
inline VoxelGrid boundary(const VoxelGrid& g) {
    VoxelGrid out(g.geometry());
    const auto& d = g.dims();
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                if (!g.at(x, y, z)) continue;
                for (const auto& o : off) {
                    if (!g.at_or_zero(x + o[0], y + o[1], z + o[2])) {
                        out.set(x, y, z, true);
                        break;
                    }
                }
            }
    return out;
}

/// For each voxel of boundary(a), min distance to a voxel of boundary(b).
inline std::vector<double> directed_surface(const VoxelGrid& a, const VoxelGrid& b) {
    const auto fa = foreground(oracle::boundary(a));
    const auto fb = foreground(oracle::boundary(b));
    std::vector<double> out;
    for (const auto& p : fa) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : fb) best = std::min(best, std::sqrt(sq_dist(a.spacing(), p, q)));
        out.push_back(best);
    }
    return out;
}

inline double nearest_rank(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(q / 100.0 * double(v.size())));
    return v[std::max<std::size_t>(k, 1) - 1];
}

inline std::int64_t count_and(const VoxelGrid& a, const VoxelGrid& b) {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) n += (a.get(i) && b.get(i)) ? 1 : 0;
    return n;
}

inline std::int64_t count(const VoxelGrid& a) { return count_and(a, a); }

/// Ball neighbourhood max / min with outside = background.
inline VoxelGrid dilate(const VoxelGrid& g, int r) {
    VoxelGrid out(g.geometry());
    const auto& d = g.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                bool hit = false;
                for (int dz = -r; dz <= r && !hit; ++dz)
                    for (int dy = -r; dy <= r && !hit; ++dy)
                        for (int dx = -r; dx <= r && !hit; ++dx)
                            if (dx * dx + dy * dy + dz * dz <= r * r && g.at_or_zero(x + dx, y + dy, z + dz)) hit = true;
                out.set(x, y, z, hit);
            }
    return out;
}

inline VoxelGrid erode(const VoxelGrid& g, int r) {
    VoxelGrid out(g.geometry());
    const auto& d = g.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                bool all = true;
                for (int dz = -r; dz <= r && all; ++dz)
                    for (int dy = -r; dy <= r && all; ++dy)
                        for (int dx = -r; dx <= r && all; ++dx)
                            if (dx * dx + dy * dy + dz * dz <= r * r && !g.at_or_zero(x + dx, y + dy, z + dz)) all = false;
                out.set(x, y, z, all);
            }
    return out;
}

/// Flood-fill labels (0 = background), numbered in scan order.
inline std::vector<int> flood_labels(const VoxelGrid& g, int connectivity) {
    const auto& d = g.dims();
    std::vector<int> label(static_cast<std::size_t>(g.size()), 0);
    int next = 0;
    for (std::int64_t start = 0; start < g.size(); ++start) {
        if (!g.get(start) || label[static_cast<std::size_t>(start)]) continue;
        ++next;
        std::deque<std::int64_t> queue{start};
        label[static_cast<std::size_t>(start)] = next;
        while (!queue.empty()) {
            const auto c = g.geometry().coords(queue.front());
            queue.pop_front();
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                        if (manhattan == 0 || (connectivity == 6 && manhattan != 1)) continue;
                        const std::int64_t x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        if (!g.at_or_zero(x, y, z)) continue;
                        const auto n = static_cast<std::size_t>(g.geometry().linear(x, y, z));
                        if (label[n]) continue;
                        label[n] = next;
                        queue.push_back(static_cast<std::int64_t>(n));
                    }
        }
    }
    return label;
}

/// True when two labelings induce the same partition of the foreground.
inline bool same_partition(const std::vector<int>& a, const std::vector<std::int32_t>& b) {
    if (a.size() != b.size()) return false;
    std::vector<std::int64_t> a_to_b, b_to_a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == 0) != (b[i] == 0)) return false;
        if (a[i] == 0) continue;
        const auto la = static_cast<std::size_t>(a[i]), lb = static_cast<std::size_t>(b[i]);
        if (a_to_b.size() <= la) a_to_b.resize(la + 1, -1);
        if (b_to_a.size() <= lb) b_to_a.resize(lb + 1, -1);
        if (a_to_b[la] == -1) a_to_b[la] = static_cast<std::int64_t>(lb);
        if (b_to_a[lb] == -1) b_to_a[lb] = static_cast<std::int64_t>(la);
        if (a_to_b[la] != static_cast<std::int64_t>(lb) || b_to_a[lb] != static_cast<std::int64_t>(la)) return false;
    }
    return true;
}

}  // namespace oracle

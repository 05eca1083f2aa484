#include <doctest.h>

#include <cmath>
#include <set>

#include "common.hpp"
#include "cranial/phantom.hpp"
#include "cranial/synth.hpp"
#include "support.hpp"

using namespace cranial;
using testing_util::kind_of;

namespace {

// Dense displacement oracle: trilinear interpolation of the control lattice
// written out per voxel, then a direct 3-D convolution with the product
// Gaussian, renormalized over in-bounds taps.
std::vector<double> dense_field(const Index3& d, const SynthConfig& cfg, std::uint64_t seed) {
    const std::int64_t s = cfg.control_spacing_vox;
    Index3 k;
    for (int i = 0; i < 3; ++i) k[i] = s >= d[i] ? 1 : (d[i] - 2 + s) / s + 1;
    Rng rng(derive(seed, {tag("control")}));
    std::vector<double> control(static_cast<std::size_t>(3 * k[0] * k[1] * k[2]));
    for (auto& c : control) c = rng.uniform(-cfg.max_disp_vox, cfg.max_disp_vox);
    auto cp = [&](Index3 i, int c) {
        for (int a = 0; a < 3; ++a) i[a] = std::clamp<std::int64_t>(i[a], 0, k[a] - 1);
        return control[static_cast<std::size_t>(3 * (i[0] + k[0] * (i[1] + k[1] * i[2])) + c)];
    };
    const std::int64_t n = d[0] * d[1] * d[2];
    std::vector<double> raw(static_cast<std::size_t>(3 * n));
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const Index3 v{x, y, z};
                Index3 lo;
                Vec3 f;
                for (int a = 0; a < 3; ++a) {
                    if (k[a] == 1) {
                        lo[a] = 0;
                        f[a] = 0.0;
                    } else {
                        const double u = double(v[a]) / double(s);
                        lo[a] = std::min<std::int64_t>(std::int64_t(std::floor(u)), k[a] - 2);
                        f[a] = u - double(lo[a]);
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int corner = 0; corner < 8; ++corner) {
                        double w = 1.0;
                        Index3 at = lo;
                        for (int a = 0; a < 3; ++a) {
                            const int bit = (corner >> a) & 1;
                            w *= bit ? f[a] : 1.0 - f[a];
                            at[a] += bit;
                        }
                        if (w != 0.0) acc += w * cp(at, c);
                    }
                    raw[static_cast<std::size_t>(3 * (x + d[0] * (y + d[1] * z)) + c)] = acc;
                }
            }
    if (cfg.smooth_sigma_vox <= 0.0) return raw;
    const double sg = cfg.smooth_sigma_vox;
    const auto r = static_cast<std::int64_t>(std::ceil(3.0 * sg));
    auto g1 = [sg](std::int64_t j) { return std::exp(-double(j * j) / (2.0 * sg * sg)); };
    std::vector<double> out(raw.size());
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                double acc[3] = {0, 0, 0}, wsum = 0.0;
                for (std::int64_t dz = -r; dz <= r; ++dz)
                    for (std::int64_t dy = -r; dy <= r; ++dy)
                        for (std::int64_t dx = -r; dx <= r; ++dx) {
                            const std::int64_t xx = x + dx, yy = y + dy, zz = z + dz;
                            if (xx < 0 || yy < 0 || zz < 0 || xx >= d[0] || yy >= d[1] || zz >= d[2]) continue;
                            const double w = g1(dx) * g1(dy) * g1(dz);
                            wsum += w;
                            for (int c = 0; c < 3; ++c)
                                acc[c] += w * raw[static_cast<std::size_t>(3 * (xx + d[0] * (yy + d[1] * zz)) + c)];
                        }
                for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(3 * (x + d[0] * (y + d[1] * z)) + c)] = acc[c] / wsum;
            }
    return out;
}

// Scalar backward trilinear warp written the obvious way.
VoxelGrid scalar_warp(const VoxelGrid& m, const DisplacementField& f) {
    VoxelGrid out(m.geometry());
    const auto& d = m.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const auto u = f.at(m.geometry().linear(x, y, z));
                const double p[3] = {double(x) + u[0], double(y) + u[1], double(z) + u[2]};
                double v = 0.0;
                const double bx = std::floor(p[0]), by = std::floor(p[1]), bz = std::floor(p[2]);
                for (int cz = 0; cz < 2; ++cz)
                    for (int cy = 0; cy < 2; ++cy)
                        for (int cx = 0; cx < 2; ++cx) {
                            const double w = (cx ? p[0] - bx : 1 - (p[0] - bx)) * (cy ? p[1] - by : 1 - (p[1] - by)) *
                                             (cz ? p[2] - bz : 1 - (p[2] - bz));
                            if (m.at_or_zero(std::int64_t(bx) + cx, std::int64_t(by) + cy, std::int64_t(bz) + cz)) v += w;
                        }
                out.set(x, y, z, v >= 0.5);
            }
    return out;
}

const VoxelGrid& skull() {
    static const VoxelGrid s = generate_phantom(PhantomConfig{}, 5);
    return s;
}

}  // namespace

TEST_CASE("degenerate patch distribution") {
    SynthConfig cfg;
    cfg.patch_count_min = cfg.patch_count_max = 1;
    cfg.shape_kinds = {PatchShape::Cuboid};
    cfg.size_frac_min = cfg.size_frac_max = 0.2;
    const auto patches = sample_patch_set(skull(), cfg, 3);
    REQUIRE(patches.size() == 1);
    const auto box = bounding_box(skull()).extent();
    for (int i = 0; i < 3; ++i) CHECK(patches[0].spec.half_extent[i] == 0.2 * double(box[i]));
    CHECK(patches[0].spec.shape == PatchShape::Cuboid);
    CHECK(skull().at(patches[0].spec.center[0], patches[0].spec.center[1], patches[0].spec.center[2]));
    // Every voxel of the rasterized patch lies inside the box.
    for (const auto& p : oracle::foreground(patches[0].mask)) CHECK(patches[0].spec.contains(p[0], p[1], p[2]));
}

TEST_CASE("patch sampling is deterministic and respects z_min_frac") {
    const SynthConfig cfg;
    const auto a = sample_patch_set(skull(), cfg, 77);
    const auto b = sample_patch_set(skull(), cfg, 77);
    REQUIRE(a.size() == b.size());
    const auto box = bounding_box(skull());
    const double floor_z = double(box.lo[2]) + cfg.z_min_frac * double(box.hi[2] - box.lo[2]);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mask == b[i].mask);
        CHECK(double(a[i].spec.center[2]) >= floor_z);
    }
    SynthConfig top = cfg;
    top.z_min_frac = 1.0;
    VoxelGrid low(Index3{8, 8, 8});
    low.set(1, 1, 0, true);
    low.set(1, 1, 3, true);
    low.set(2, 2, 2, true);
    for (const auto& p : sample_patch_set(low, top, 1)) CHECK(p.spec.center == Index3{1, 1, 3});
    CHECK(kind_of([&] { (void)sample_patch_set(VoxelGrid(Index3{4, 4, 4}), cfg, 1); }) == ErrorKind::EmptyVolume);
}

TEST_CASE("patch count is uniform over [min, max]") {
    SynthConfig cfg;
    cfg.patch_count_min = 1;
    cfg.patch_count_max = 3;
    const int draws = 500;
    int hist[3] = {0, 0, 0};
    for (int s = 0; s < draws; ++s) ++hist[sample_patch_set(skull(), cfg, derive(99, {std::uint64_t(s)})).size() - 1];
    const double p = 1.0 / 3.0, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
    for (int h : hist) {
        CHECK(double(h) >= mean - 3 * sd);
        CHECK(double(h) <= mean + 3 * sd);
    }
}

TEST_CASE("displacement fields") {
    SynthConfig cfg;
    cfg.max_disp_vox = 0.0;
    CHECK(random_displacement_field({9, 8, 7}, cfg, 1).max_abs() == 0.0);

    SynthConfig flat;
    flat.control_spacing_vox = 64;
    const auto f = random_displacement_field({12, 10, 9}, flat, 4);
    const auto first = f.at(0);
    for (std::int64_t i = 0; i < 12 * 10 * 9; ++i)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(f.at(i)[c] - first[c]) <= 1e-12);

    SynthConfig off;
    off.deform_enabled = false;
    CHECK(kind_of([&] { (void)random_displacement_field({4, 4, 4}, off, 1); }) == ErrorKind::InvalidArgument);

    const auto half = gaussian_half_kernel(2.0);
    CHECK(half.size() == 7);
    CHECK(half[0] == 1.0);
}

TEST_CASE("displacement field matches the dense oracle") {
    Rng rng(51);
    for (int rep = 0; rep < 4; ++rep) {
        SynthConfig cfg;
        cfg.control_spacing_vox = static_cast<int>(rng.uniform_int(3, 9));
        cfg.smooth_sigma_vox = rep == 0 ? 0.0 : rng.uniform(0.5, 2.5);
        const Index3 d = rep == 1 ? Index3{16, 16, 16} : oracle::random_dims(rng, 5, 14);
        const auto seed = rng.next_u64();
        const auto f = random_displacement_field(d, cfg, seed);
        const auto o = dense_field(d, cfg, seed);
        REQUIRE(f.data.size() == o.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) worst = std::max(worst, std::abs(f.data[i] - o[i]));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("warping") {
    Rng rng(52);
    const Geometry geom{{14, 12, 10}};
    const auto blob = oracle::blob_mask(rng, geom, 3);
    DisplacementField zero{geom.dims, std::vector<double>(std::size_t(3 * geom.voxel_count()), 0.0)};
    CHECK(warp_mask(blob, zero) == blob);

    DisplacementField shift = zero;
    for (std::int64_t i = 0; i < geom.voxel_count(); ++i) shift.data[std::size_t(3 * i)] = -2.0;
    const auto moved = warp_mask(blob, shift);
    for (std::int64_t z = 0; z < 10; ++z)
        for (std::int64_t y = 0; y < 12; ++y)
            for (std::int64_t x = 0; x < 14; ++x) CHECK(moved.at(x, y, z) == blob.at_or_zero(x - 2, y, z));

    for (int rep = 0; rep < 5; ++rep) {
        const auto m = oracle::blob_mask(rng, geom, 4);
        const auto f = random_displacement_field(geom.dims, SynthConfig{}, rng.next_u64());
        CHECK(warp_mask(m, f) == scalar_warp(m, f));
    }
}

TEST_CASE("cases partition the skull") {
    const SynthConfig cfg;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto c = synthesize_case(skull(), cfg, seed);
        CHECK_FALSE(c.defect_gt.empty());
        CHECK(unite(c.defective, c.defect_gt) == skull());
        CHECK(intersect(c.defective, c.defect_gt).empty());
        CHECK(c.config_hash == config_hash(cfg));
        const auto again = synthesize_case(skull(), cfg, seed);
        CHECK(again.defect_gt == c.defect_gt);
        CHECK(again.attempt == c.attempt);
    }
}

TEST_CASE("ND equals D with zero displacement, and ND edges are the raw patch shapes") {
    SynthConfig d;
    d.max_disp_vox = 0.0;
    SynthConfig nd;
    nd.deform_enabled = false;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = synthesize_case(skull(), d, seed);
        const auto b = synthesize_case(skull(), nd, seed);
        CHECK(a.defect_gt == b.defect_gt);
        CHECK(a.defective == b.defective);

        VoxelGrid holes(skull().geometry());
        for (const auto& p : sample_patch_set(skull(), nd, derive(seed, {tag("attempt"), std::uint64_t(b.attempt)})))
            holes = unite(holes, p.mask);
        CHECK(b.defect_gt == intersect(holes, skull()));
    }
}

TEST_CASE("synthesis failures and config round trip") {
    SynthConfig cfg;
    cfg.size_frac_min = cfg.size_frac_max = 0.01;  // sub-voxel patches on a skull of one voxel
    cfg.deform_enabled = false;
    VoxelGrid dot(Index3{4, 4, 4});
    dot.set(1, 1, 1, true);
    const auto c = synthesize_case(dot, cfg, 1);  // a single-voxel patch still covers its centre
    CHECK(c.defect_gt == dot);

    CHECK(kind_of([&] { (void)synthesize_case(VoxelGrid(Index3{4, 4, 4}), cfg, 1); }) == ErrorKind::EmptyVolume);
    SynthConfig bad;
    bad.patch_count_min = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidArgument);

    SynthConfig custom;
    custom.shape_kinds = {PatchShape::Ellipsoid};
    custom.max_disp_vox = 3.5;
    const auto back = synth_config_from_json(to_json(custom));
    CHECK(config_hash(back) == config_hash(custom));
    CHECK(config_hash(back) != config_hash(SynthConfig{}));
    CHECK(config_hash(custom).size() == 16);
}

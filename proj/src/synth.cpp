#include "cranial/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cranial/error.hpp"
#include "cranial/rng.hpp"

namespace cranial {

const char* to_string(PatchShape s) { return s == PatchShape::Cuboid ? "cuboid" : "ellipsoid"; }

namespace {

PatchShape shape_from_string(const std::string& s) {
    if (s == "cuboid") return PatchShape::Cuboid;
    if (s == "ellipsoid") return PatchShape::Ellipsoid;
    throw Error(ErrorKind::InvalidArgument, "unknown patch shape '" + s + "'");
}

}  // namespace

void SynthConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, "SynthConfig: " + msg); };
    if (patch_count_min < 1 || patch_count_min > patch_count_max) bad("need 1 <= patch_count_min <= patch_count_max");
    if (shape_kinds.empty()) bad("shape_kinds is empty");
    if (!(size_frac_min > 0.0 && size_frac_min <= size_frac_max && size_frac_max < 1.0)) {
        bad("need 0 < size_frac_min <= size_frac_max < 1");
    }
    if (!(z_min_frac >= 0.0 && z_min_frac <= 1.0)) bad("z_min_frac must lie in [0, 1]");
    if (control_spacing_vox < 2) bad("control_spacing_vox must be >= 2");
    if (!(max_disp_vox >= 0.0) || !std::isfinite(max_disp_vox)) bad("max_disp_vox must be finite and >= 0");
    if (!(smooth_sigma_vox >= 0.0) || !std::isfinite(smooth_sigma_vox)) bad("smooth_sigma_vox must be >= 0");
}

nlohmann::json to_json(const SynthConfig& c) {
    std::vector<std::string> kinds;
    for (auto k : c.shape_kinds) kinds.emplace_back(to_string(k));
    return {{"patch_count_min", c.patch_count_min},
            {"patch_count_max", c.patch_count_max},
            {"shape_kinds", kinds},
            {"size_frac_min", c.size_frac_min},
            {"size_frac_max", c.size_frac_max},
            {"z_min_frac", c.z_min_frac},
            {"deform_enabled", c.deform_enabled},
            {"control_spacing_vox", c.control_spacing_vox},
            {"max_disp_vox", c.max_disp_vox},
            {"smooth_sigma_vox", c.smooth_sigma_vox}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c) {
    try {
        c.patch_count_min = j.value("patch_count_min", c.patch_count_min);
        c.patch_count_max = j.value("patch_count_max", c.patch_count_max);
        if (j.contains("shape_kinds")) {
            c.shape_kinds.clear();
            for (const auto& k : j.at("shape_kinds")) c.shape_kinds.push_back(shape_from_string(k.get<std::string>()));
        }
        c.size_frac_min = j.value("size_frac_min", c.size_frac_min);
        c.size_frac_max = j.value("size_frac_max", c.size_frac_max);
        c.z_min_frac = j.value("z_min_frac", c.z_min_frac);
        c.deform_enabled = j.value("deform_enabled", c.deform_enabled);
        c.control_spacing_vox = j.value("control_spacing_vox", c.control_spacing_vox);
        c.max_disp_vox = j.value("max_disp_vox", c.max_disp_vox);
        c.smooth_sigma_vox = j.value("smooth_sigma_vox", c.smooth_sigma_vox);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("bad synth config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_hash(const SynthConfig& c) {
    const std::string canonical = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : canonical) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool PatchSpec::contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    const double d[3] = {static_cast<double>(x - center[0]), static_cast<double>(y - center[1]),
                         static_cast<double>(z - center[2])};
    if (shape == PatchShape::Cuboid) {
        return std::abs(d[0]) <= half_extent[0] && std::abs(d[1]) <= half_extent[1] &&
               std::abs(d[2]) <= half_extent[2];
    }
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double u = d[i] / half_extent[i];
        s += u * u;
    }
    return s <= 1.0;
}

nlohmann::json to_json(const PatchSpec& p) {
    return {{"shape", to_string(p.shape)}, {"center", p.center}, {"half_extent_vox", p.half_extent}};
}

namespace {

VoxelGrid rasterize(const PatchSpec& p, const Geometry& geom) {
    VoxelGrid mask(geom);
    Index3 lo, hi;
    for (int i = 0; i < 3; ++i) {
        lo[i] = std::max<std::int64_t>(0, p.center[i] - static_cast<std::int64_t>(std::floor(p.half_extent[i])));
        hi[i] = std::min<std::int64_t>(geom.dims[i] - 1,
                                       p.center[i] + static_cast<std::int64_t>(std::floor(p.half_extent[i])));
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
        for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
            for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
                if (p.contains(x, y, z)) mask.set(x, y, z, true);
    return mask;
}

}  // namespace

std::vector<Patch> sample_patch_set(const VoxelGrid& skull, const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const BBox box = bounding_box(skull);  // EmptyVolume
    const Index3 extent = box.extent();
    const double z_floor = static_cast<double>(box.lo[2]) + cfg.z_min_frac * static_cast<double>(box.hi[2] - box.lo[2]);

    std::vector<std::int64_t> eligible;
    for (std::int64_t idx : skull.foreground_indices()) {
        if (static_cast<double>(skull.geometry().coords(idx)[2]) >= z_floor) eligible.push_back(idx);
    }
    if (eligible.empty()) {
        throw Error(ErrorKind::NoEligibleCenters, "z_min_frac excludes every skull voxel");
    }

    Rng count_rng(derive(seed, {tag("count")}));
    const auto count = count_rng.uniform_int(cfg.patch_count_min, cfg.patch_count_max);
    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
        Rng rng(derive(seed, {tag("patch"), static_cast<std::uint64_t>(k)}));
        PatchSpec spec;
        spec.shape = cfg.shape_kinds[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(cfg.shape_kinds.size()) - 1))];
        const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1);
        spec.center = skull.geometry().coords(eligible[static_cast<std::size_t>(pick)]);
        for (int i = 0; i < 3; ++i) {
            spec.half_extent[i] = rng.uniform(cfg.size_frac_min, cfg.size_frac_max) * static_cast<double>(extent[i]);
        }
        patches.push_back({spec, rasterize(spec, skull.geometry())});
    }
    return patches;
}

double DisplacementField::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> gaussian_half_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    std::vector<double> w(radius + 1);
    for (std::size_t j = 0; j <= radius; ++j) {
        const double x = static_cast<double>(j);
        w[j] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    }
    return w;
}

namespace {

std::int64_t lattice_points(std::int64_t n, std::int64_t spacing) {
    if (spacing >= n) return 1;
    return (n - 1 + spacing - 1) / spacing + 1;
}

// Smooths one axis of an interleaved 3-component field in place.
void smooth_axis(std::vector<double>& data, const Index3& dims, int axis, const std::vector<double>& half) {
    const std::int64_t n = dims[static_cast<std::size_t>(axis)];
    const std::int64_t strides[3] = {1, dims[0], dims[0] * dims[1]};
    const std::int64_t stride = strides[axis];
    const std::int64_t total = dims[0] * dims[1] * dims[2];
    const std::int64_t lines = total / n;
    const auto radius = static_cast<std::int64_t>(half.size()) - 1;
#pragma omp parallel
    {
        std::vector<double> line(static_cast<std::size_t>(3 * n));
#pragma omp for schedule(static)
        for (std::int64_t l = 0; l < lines; ++l) {
            std::int64_t base;
            if (axis == 0) {
                base = l * n;
            } else if (axis == 1) {
                base = (l % dims[0]) + (l / dims[0]) * dims[0] * dims[1];
            } else {
                base = l;
            }
            for (std::int64_t i = 0; i < n; ++i)
                for (int c = 0; c < 3; ++c)
                    line[static_cast<std::size_t>(3 * i + c)] = data[static_cast<std::size_t>(3 * (base + i * stride) + c)];
            for (std::int64_t i = 0; i < n; ++i) {
                double acc[3] = {0.0, 0.0, 0.0};
                double wsum = 0.0;
                for (std::int64_t j = -radius; j <= radius; ++j) {
                    const std::int64_t k = i + j;
                    if (k < 0 || k >= n) continue;
                    const double w = half[static_cast<std::size_t>(std::abs(j))];
                    wsum += w;
                    for (int c = 0; c < 3; ++c) acc[c] += w * line[static_cast<std::size_t>(3 * k + c)];
                }
                for (int c = 0; c < 3; ++c)
                    data[static_cast<std::size_t>(3 * (base + i * stride) + c)] = acc[c] / wsum;
            }
        }
    }
}

}  // namespace

DisplacementField random_displacement_field(const Index3& dims, const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!cfg.deform_enabled) {
        throw Error(ErrorKind::InvalidArgument, "random_displacement_field requires deform_enabled");
    }
    const std::int64_t s = cfg.control_spacing_vox;
    const Index3 k{lattice_points(dims[0], s), lattice_points(dims[1], s), lattice_points(dims[2], s)};

    Rng rng(derive(seed, {tag("control")}));
    std::vector<double> control(static_cast<std::size_t>(3 * k[0] * k[1] * k[2]));
    for (auto& c : control) c = rng.uniform(-cfg.max_disp_vox, cfg.max_disp_vox);

    // Per-axis interpolation stencil: lower lattice index and fraction.
    auto stencil = [s](std::int64_t n, std::int64_t points) {
        std::vector<std::pair<std::int64_t, double>> st(static_cast<std::size_t>(n));
        for (std::int64_t x = 0; x < n; ++x) {
            if (points == 1) {
                st[static_cast<std::size_t>(x)] = {0, 0.0};
                continue;
            }
            const double u = static_cast<double>(x) / static_cast<double>(s);
            const std::int64_t k0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(u)), points - 2);
            st[static_cast<std::size_t>(x)] = {k0, u - static_cast<double>(k0)};
        }
        return st;
    };
    const auto sx = stencil(dims[0], k[0]);
    const auto sy = stencil(dims[1], k[1]);
    const auto sz = stencil(dims[2], k[2]);
    auto cp = [&](std::int64_t i, std::int64_t j, std::int64_t l, int c) {
        i = std::min(i, k[0] - 1);
        j = std::min(j, k[1] - 1);
        l = std::min(l, k[2] - 1);
        return control[static_cast<std::size_t>(3 * (i + k[0] * (j + k[1] * l)) + c)];
    };

    DisplacementField field{dims, std::vector<double>(static_cast<std::size_t>(3 * dims[0] * dims[1] * dims[2]))};
#pragma omp parallel for schedule(static)
    for (std::int64_t z = 0; z < dims[2]; ++z)
        for (std::int64_t y = 0; y < dims[1]; ++y)
            for (std::int64_t x = 0; x < dims[0]; ++x) {
                const auto [i0, fx] = sx[static_cast<std::size_t>(x)];
                const auto [j0, fy] = sy[static_cast<std::size_t>(y)];
                const auto [l0, fz] = sz[static_cast<std::size_t>(z)];
                const auto idx = static_cast<std::size_t>(3 * (x + dims[0] * (y + dims[1] * z)));
                for (int c = 0; c < 3; ++c) {
                    double v = 0.0;
                    for (int dl = 0; dl < 2; ++dl)
                        for (int dj = 0; dj < 2; ++dj)
                            for (int di = 0; di < 2; ++di) {
                                const double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) * (dl ? fz : 1.0 - fz);
                                if (w == 0.0) continue;
                                v += w * cp(i0 + di, j0 + dj, l0 + dl, c);
                            }
                    field.data[idx + static_cast<std::size_t>(c)] = v;
                }
            }

    if (cfg.smooth_sigma_vox > 0.0) {
        const auto half = gaussian_half_kernel(cfg.smooth_sigma_vox);
        for (int axis = 0; axis < 3; ++axis) smooth_axis(field.data, dims, axis, half);
    }
    return field;
}

VoxelGrid warp_mask(const VoxelGrid& mask, const DisplacementField& field) {
    if (mask.dims() != field.dims) {
        throw Error(ErrorKind::GeometryMismatch, "displacement field dims differ from " + describe(mask.geometry()));
    }
    const auto& d = mask.dims();
    const auto bytes = mask.to_bytes();
    auto sample = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> double {
        if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) return 0.0;
        return bytes[static_cast<std::size_t>(x + d[0] * (y + d[1] * z))] ? 1.0 : 0.0;
    };
    std::vector<std::uint8_t> out(bytes.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const std::int64_t idx = x + d[0] * (y + d[1] * z);
                const auto disp = field.at(idx);
                const double px = static_cast<double>(x) + disp[0];
                const double py = static_cast<double>(y) + disp[1];
                const double pz = static_cast<double>(z) + disp[2];
                const double flx = std::floor(px), fly = std::floor(py), flz = std::floor(pz);
                const double fx = px - flx, fy = py - fly, fz = pz - flz;
                const auto x0 = static_cast<std::int64_t>(flx);
                const auto y0 = static_cast<std::int64_t>(fly);
                const auto z0 = static_cast<std::int64_t>(flz);
                double v = 0.0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
                            if (w != 0.0) v += w * sample(x0 + dx, y0 + dy, z0 + dz);
                        }
                out[static_cast<std::size_t>(idx)] = v >= 0.5 ? 1 : 0;
            }
    return VoxelGrid::from_bytes(mask.geometry(), out);
}

nlohmann::json case_metadata(const CasePair& c) {
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& p : c.patches) patches.push_back(to_json(p));
    return {{"seed", c.seed},
            {"config_hash", c.config_hash},
            {"attempt", c.attempt},
            {"patches", patches},
            {"defect_voxels", c.defect_gt.foreground_count()},
            {"defective_voxels", c.defective.foreground_count()}};
}

CasePair synthesize_case(const VoxelGrid& skull, const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (skull.empty()) throw Error(ErrorKind::EmptyVolume, "cannot synthesize a defect on an empty skull");
    for (int attempt = 0; attempt < kMaxSynthesisAttempts; ++attempt) {
        const std::uint64_t attempt_seed = derive(seed, {tag("attempt"), static_cast<std::uint64_t>(attempt)});
        auto patches = sample_patch_set(skull, cfg, attempt_seed);
        VoxelGrid holes(skull.geometry());
        std::vector<PatchSpec> specs;
        for (std::size_t k = 0; k < patches.size(); ++k) {
            VoxelGrid mask = std::move(patches[k].mask);
            if (cfg.deform_enabled) {
                const auto field =
                    random_displacement_field(skull.dims(), cfg, derive(attempt_seed, {tag("field"), k}));
                mask = warp_mask(mask, field);
            }
            holes = unite(holes, mask);
            specs.push_back(patches[k].spec);
        }
        VoxelGrid defect = intersect(holes, skull);
        if (defect.empty()) continue;
        CasePair out;
        out.defective = subtract(skull, defect);
        out.defect_gt = std::move(defect);
        out.seed = seed;
        out.config_hash = config_hash(cfg);
        out.attempt = attempt;
        out.patches = std::move(specs);
        return out;
    }
    throw Error(ErrorKind::SynthesisFailed,
                "no nonempty defect after " + std::to_string(kMaxSynthesisAttempts) + " attempts");
}

}  // namespace cranial

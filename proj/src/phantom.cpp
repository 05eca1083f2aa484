#include "cranial/phantom.hpp"

#include <algorithm>
#include <utility>

#include "cranial/error.hpp"
#include "cranial/morphology.hpp"
#include "cranial/rng.hpp"

namespace cranial {

void PhantomConfig::validate() const {
    for (auto d : dims) {
        if (d <= 0) throw Error(ErrorKind::DegenerateConfig, "phantom dims must be positive");
    }
    auto frac = [](double lo, double hi, const char* name) {
        if (!(lo > 0.0 && lo <= hi && hi < 0.5)) {
            throw Error(ErrorKind::DegenerateConfig, std::string(name) + " fractions must satisfy 0 < min <= max < 0.5");
        }
    };
    frac(axis_frac_min, axis_frac_max, "axis");
    frac(thickness_frac_min, thickness_frac_max, "thickness");
}

nlohmann::json to_json(const PhantomConfig& c) {
    return {{"dims", c.dims},
            {"axis_frac_min", c.axis_frac_min},
            {"axis_frac_max", c.axis_frac_max},
            {"thickness_frac_min", c.thickness_frac_min},
            {"thickness_frac_max", c.thickness_frac_max}};
}

PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig c) {
    if (j.contains("dims")) c.dims = j.at("dims").get<Index3>();
    c.axis_frac_min = j.value("axis_frac_min", c.axis_frac_min);
    c.axis_frac_max = j.value("axis_frac_max", c.axis_frac_max);
    c.thickness_frac_min = j.value("thickness_frac_min", c.thickness_frac_min);
    c.thickness_frac_max = j.value("thickness_frac_max", c.thickness_frac_max);
    return c;
}

double PhantomParams::wall_vox() const { return thickness * std::max({radii[0], radii[1], radii[2]}); }

namespace {

PhantomParams draw_params(const PhantomConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    PhantomParams p;
    for (int i = 0; i < 3; ++i) {
        p.radii[i] = rng.uniform(cfg.axis_frac_min, cfg.axis_frac_max) * static_cast<double>(cfg.dims[i]);
        p.center[i] = 0.5 * static_cast<double>(cfg.dims[i] - 1);
    }
    p.thickness = rng.uniform(cfg.thickness_frac_min, cfg.thickness_frac_max);
    return p;
}

VoxelGrid rasterize(const PhantomConfig& cfg, const PhantomParams& p) {
    VoxelGrid g(cfg.dims);
    const double inner = (1.0 - p.thickness) * (1.0 - p.thickness);
    for (std::int64_t z = 0; z < cfg.dims[2]; ++z)
        for (std::int64_t y = 0; y < cfg.dims[1]; ++y)
            for (std::int64_t x = 0; x < cfg.dims[0]; ++x) {
                const double dx = (static_cast<double>(x) - p.center[0]) / p.radii[0];
                const double dy = (static_cast<double>(y) - p.center[1]) / p.radii[1];
                const double dz = (static_cast<double>(z) - p.center[2]) / p.radii[2];
                const double s = dx * dx + dy * dy + dz * dz;
                if (s >= inner && s <= 1.0) g.set(x, y, z, true);
            }
    return g;
}

// Thin shells (wall under a voxel) can pinch apart on the lattice; such
// draws are rejected and redrawn from the next sub-seed.
std::pair<PhantomParams, VoxelGrid> accepted(const PhantomConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    bool any_nonempty = false;
    for (std::uint64_t attempt = 0; attempt < kMaxPhantomAttempts; ++attempt) {
        const auto p = draw_params(cfg, derive(seed, {tag("phantom"), attempt}));
        VoxelGrid g = rasterize(cfg, p);
        if (g.empty()) continue;
        any_nonempty = true;
        if (connected_components(g, Connectivity::TwentySix).component_count() == 1) return {p, std::move(g)};
    }
    throw Error(ErrorKind::DegenerateConfig, any_nonempty ? "no single-component phantom shell at these dims"
                                                          : "phantom shell is empty at these dims");
}

}  // namespace

PhantomParams phantom_params(const PhantomConfig& cfg, std::uint64_t seed) { return accepted(cfg, seed).first; }

VoxelGrid generate_phantom(const PhantomConfig& cfg, std::uint64_t seed) { return accepted(cfg, seed).second; }

}  // namespace cranial

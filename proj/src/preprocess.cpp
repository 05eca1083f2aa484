#include "cranial/preprocess.hpp"

#include <algorithm>

#include "cranial/error.hpp"

namespace cranial {

nlohmann::json to_json(const GeomTransform& t) {
    return {
        {"crop_lo", t.crop_lo},
        {"original_dims", t.original_dims},
        {"cropped_dims", t.cropped_dims},
        {"scale", t.scale},
        {"target_dims", t.target_dims},
        {"original_spacing_mm", t.original_spacing},
        {"original_origin_mm", t.original_origin},
    };
}

GeomTransform transform_from_json(const nlohmann::json& j) {
    try {
        GeomTransform t;
        t.crop_lo = j.at("crop_lo").get<Index3>();
        t.original_dims = j.at("original_dims").get<Index3>();
        t.cropped_dims = j.at("cropped_dims").get<Index3>();
        t.scale = j.at("scale").get<Vec3>();
        t.target_dims = j.at("target_dims").get<Index3>();
        t.original_spacing = j.at("original_spacing_mm").get<Vec3>();
        t.original_origin = j.at("original_origin_mm").get<Vec3>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("bad transform JSON: ") + e.what());
    }
}

std::pair<VoxelGrid, GeomTransform> crop_to_content(const VoxelGrid& g, std::int64_t margin_vox) {
    if (margin_vox < 0) throw Error(ErrorKind::InvalidArgument, "margin must be non-negative");
    BBox box = bounding_box(g);
    for (int i = 0; i < 3; ++i) {
        box.lo[i] = std::max<std::int64_t>(0, box.lo[i] - margin_vox);
        box.hi[i] = std::min<std::int64_t>(g.dims()[i] - 1, box.hi[i] + margin_vox);
    }
    GeomTransform t;
    t.crop_lo = box.lo;
    t.original_dims = g.dims();
    t.cropped_dims = box.extent();
    t.target_dims = t.cropped_dims;
    t.original_spacing = g.spacing();
    t.original_origin = g.origin();
    return {crop(g, box), t};
}

namespace {

// floor((2i + 1) * n_in / (2 n_out)) == round-half-up of the mapped centre.
std::int64_t nearest_source(std::int64_t i, std::int64_t n_in, std::int64_t n_out) {
    const std::int64_t s = ((2 * i + 1) * n_in) / (2 * n_out);
    return std::clamp<std::int64_t>(s, 0, n_in - 1);
}

VoxelGrid resample_to(const VoxelGrid& g, const Geometry& out_geom) {
    VoxelGrid out(out_geom);
    const auto& in = g.dims();
    const auto& od = out_geom.dims;
    std::vector<std::int64_t> mx(static_cast<std::size_t>(od[0])), my(static_cast<std::size_t>(od[1])),
        mz(static_cast<std::size_t>(od[2]));
    for (std::int64_t i = 0; i < od[0]; ++i) mx[static_cast<std::size_t>(i)] = nearest_source(i, in[0], od[0]);
    for (std::int64_t i = 0; i < od[1]; ++i) my[static_cast<std::size_t>(i)] = nearest_source(i, in[1], od[1]);
    for (std::int64_t i = 0; i < od[2]; ++i) mz[static_cast<std::size_t>(i)] = nearest_source(i, in[2], od[2]);
    for (std::int64_t z = 0; z < od[2]; ++z)
        for (std::int64_t y = 0; y < od[1]; ++y)
            for (std::int64_t x = 0; x < od[0]; ++x)
                if (g.at(mx[static_cast<std::size_t>(x)], my[static_cast<std::size_t>(y)],
                         mz[static_cast<std::size_t>(z)]))
                    out.set(x, y, z, true);
    return out;
}

// Geometry of a resampled grid covering the same physical box as `in`.
Geometry resampled_geometry(const Geometry& in, const Index3& target) {
    Geometry out = in;
    out.dims = target;
    for (int i = 0; i < 3; ++i) {
        const double ratio = static_cast<double>(in.dims[i]) / static_cast<double>(target[i]);
        out.spacing[i] = in.spacing[i] * ratio;
        out.origin[i] = in.origin[i] - 0.5 * in.spacing[i] + 0.5 * out.spacing[i];
    }
    return out;
}

}  // namespace

std::pair<VoxelGrid, GeomTransform> resample_nearest(const VoxelGrid& g, const Index3& target_dims) {
    for (int i = 0; i < 3; ++i) {
        if (target_dims[i] <= 0) throw Error(ErrorKind::InvalidArgument, "target dims must be positive");
    }
    GeomTransform t;
    t.original_dims = g.dims();
    t.cropped_dims = g.dims();
    t.target_dims = target_dims;
    t.original_spacing = g.spacing();
    t.original_origin = g.origin();
    for (int i = 0; i < 3; ++i) t.scale[i] = static_cast<double>(target_dims[i]) / static_cast<double>(g.dims()[i]);
    if (target_dims == g.dims()) return {g, t};
    return {resample_to(g, resampled_geometry(g.geometry(), target_dims)), t};
}

GeomTransform compose(const GeomTransform& crop_t, const GeomTransform& resample_t) {
    if (resample_t.original_dims != crop_t.target_dims) {
        throw Error(ErrorKind::DimensionError, "compose: resample input dims differ from crop output dims");
    }
    GeomTransform t = crop_t;
    t.scale = resample_t.scale;
    t.target_dims = resample_t.target_dims;
    return t;
}

VoxelGrid restore(const VoxelGrid& g, const GeomTransform& t) {
    if (g.dims() != t.target_dims) {
        throw Error(ErrorKind::DimensionError, "restore expects dims of the transform target");
    }
    Geometry original{t.original_dims, t.original_spacing, t.original_origin};
    Geometry cropped = original;
    cropped.dims = t.cropped_dims;
    for (int i = 0; i < 3; ++i) {
        cropped.origin[i] = original.origin[i] + static_cast<double>(t.crop_lo[i]) * original.spacing[i];
    }
    const VoxelGrid back = (t.cropped_dims == t.target_dims) ? g.with_geometry(cropped) : resample_to(g, cropped);
    if (t.cropped_dims == t.original_dims && t.crop_lo == Index3{0, 0, 0}) return back;
    return paste(back, original, t.crop_lo);
}

std::pair<VoxelGrid, GeomTransform> normalize(const VoxelGrid& g, std::int64_t margin_vox,
                                              const Index3& target_dims) {
    auto [cropped, crop_t] = crop_to_content(g, margin_vox);
    auto [resampled, res_t] = resample_nearest(cropped, target_dims);
    return {std::move(resampled), compose(crop_t, res_t)};
}

}  // namespace cranial

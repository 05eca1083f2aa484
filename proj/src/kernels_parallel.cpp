#include <algorithm>
#include <atomic>
#include <vector>

#include <cblas.h>

#include "cranial/kernels.hpp"

namespace cranial::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::Parallel};

// Column buffers are capped near 4 MiB.
constexpr std::int64_t kColumnBudget = std::int64_t{1} << 19;

bool is_pointwise(const ConvDims& cd) {
    return cd.k_d == 1 && cd.k_h == 1 && cd.k_w == 1 && cd.stride == 1 && cd.pad == 0;
}

std::int64_t planes_per_slab(const ConvDims& cd) {
    const std::int64_t per_plane = cd.in_channels * cd.kernel_volume() * cd.out_h() * cd.out_w();
    return std::clamp<std::int64_t>(kColumnBudget / std::max<std::int64_t>(per_plane, 1), 1, cd.out_d());
}

// Lowers output planes [oz0, oz0 + planes) of batch item `xn` into a
// (in_c * kvol) x P column matrix.
void im2col(const ConvDims& cd, const double* xn, std::int64_t oz0, std::int64_t planes, double* col) {
    const std::int64_t oh = cd.out_h(), ow = cd.out_w();
    const std::int64_t p_count = planes * oh * ow;
    const std::int64_t rows = cd.in_channels * cd.kernel_volume();
    const std::int64_t kvol = cd.kernel_volume();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t ci = r / kvol;
        const std::int64_t kz = (r / (cd.k_h * cd.k_w)) % cd.k_d;
        const std::int64_t ky = (r / cd.k_w) % cd.k_h;
        const std::int64_t kx = r % cd.k_w;
        const double* xc = xn + ci * cd.in_spatial();
        double* dst = col + r * p_count;
        for (std::int64_t pz = 0; pz < planes; ++pz) {
            const std::int64_t iz = (oz0 + pz) * cd.stride - cd.pad + kz;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                const std::int64_t iy = oy * cd.stride - cd.pad + ky;
                double* out = dst + (pz * oh + oy) * ow;
                if (iz < 0 || iz >= cd.in_d || iy < 0 || iy >= cd.in_h) {
                    std::fill(out, out + ow, 0.0);
                    continue;
                }
                const double* src = xc + (iz * cd.in_h + iy) * cd.in_w;
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    const std::int64_t ix = ox * cd.stride - cd.pad + kx;
                    out[ox] = (ix >= 0 && ix < cd.in_w) ? src[ix] : 0.0;
                }
            }
        }
    }
}

// Scatter-adds a column matrix back into grad_x of one batch item. Rows of a
// single input channel touch the same plane, so channels are the unit of
// parallelism.
void col2im(const ConvDims& cd, const double* col, std::int64_t oz0, std::int64_t planes, double* gxn) {
    const std::int64_t oh = cd.out_h(), ow = cd.out_w();
    const std::int64_t p_count = planes * oh * ow;
    const std::int64_t kvol = cd.kernel_volume();
#pragma omp parallel for schedule(static)
    for (std::int64_t ci = 0; ci < cd.in_channels; ++ci) {
        double* gc = gxn + ci * cd.in_spatial();
        for (std::int64_t k = 0; k < kvol; ++k) {
            const std::int64_t kz = k / (cd.k_h * cd.k_w);
            const std::int64_t ky = (k / cd.k_w) % cd.k_h;
            const std::int64_t kx = k % cd.k_w;
            const double* src = col + (ci * kvol + k) * p_count;
            for (std::int64_t pz = 0; pz < planes; ++pz) {
                const std::int64_t iz = (oz0 + pz) * cd.stride - cd.pad + kz;
                if (iz < 0 || iz >= cd.in_d) continue;
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t iy = oy * cd.stride - cd.pad + ky;
                    if (iy < 0 || iy >= cd.in_h) continue;
                    const double* s = src + (pz * oh + oy) * ow;
                    double* dst = gc + (iz * cd.in_h + iy) * cd.in_w;
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const std::int64_t ix = ox * cd.stride - cd.pad + kx;
                        if (ix >= 0 && ix < cd.in_w) dst[ix] += s[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

namespace parallel {

void conv3d_forward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
    const std::int64_t out_sp = cd.out_spatial();
    const std::int64_t k_rows = cd.in_channels * cd.kernel_volume();
    const auto m = static_cast<blasint>(cd.out_channels);
    const auto kk = static_cast<blasint>(k_rows);
    const std::int64_t plane = cd.out_h() * cd.out_w();
    const std::int64_t slab = planes_per_slab(cd);
    std::vector<double> col(is_pointwise(cd) ? 0 : static_cast<std::size_t>(k_rows * slab * plane));

    for (std::int64_t n = 0; n < cd.batch; ++n) {
        const double* xn = x.data() + n * cd.in_channels * cd.in_spatial();
        double* yn = y.data() + n * cd.out_channels * out_sp;
        if (is_pointwise(cd)) {
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, static_cast<blasint>(out_sp), kk, 1.0,
                        weight.data(), kk, xn, static_cast<blasint>(out_sp), 0.0, yn, static_cast<blasint>(out_sp));
        } else {
            for (std::int64_t oz0 = 0; oz0 < cd.out_d(); oz0 += slab) {
                const std::int64_t planes = std::min(slab, cd.out_d() - oz0);
                const std::int64_t p_count = planes * plane;
                im2col(cd, xn, oz0, planes, col.data());
                cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, static_cast<blasint>(p_count), kk, 1.0,
                            weight.data(), kk, col.data(), static_cast<blasint>(p_count), 0.0, yn + oz0 * plane,
                            static_cast<blasint>(out_sp));
            }
        }
#pragma omp parallel for schedule(static)
        for (std::int64_t co = 0; co < cd.out_channels; ++co) {
            double* row = yn + co * out_sp;
            const double b = bias[static_cast<std::size_t>(co)];
            for (std::int64_t p = 0; p < out_sp; ++p) row[p] += b;
        }
    }
}

void conv3d_backward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
    const std::int64_t out_sp = cd.out_spatial();
    const std::int64_t k_rows = cd.in_channels * cd.kernel_volume();
    const auto m = static_cast<blasint>(cd.out_channels);
    const auto kk = static_cast<blasint>(k_rows);
    const auto ld_y = static_cast<blasint>(out_sp);
    const std::int64_t plane = cd.out_h() * cd.out_w();
    const std::int64_t slab = planes_per_slab(cd);
    const bool want_x = !grad_x.empty();
    const bool pointwise = is_pointwise(cd);
    std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(k_rows * slab * plane));
    std::vector<double> gcol(pointwise || !want_x ? 0 : col.size());

    for (std::int64_t n = 0; n < cd.batch; ++n) {
        const double* xn = x.data() + n * cd.in_channels * cd.in_spatial();
        const double* gyn = grad_y.data() + n * cd.out_channels * out_sp;

#pragma omp parallel for schedule(static)
        for (std::int64_t co = 0; co < cd.out_channels; ++co) {
            const double* row = gyn + co * out_sp;
            double s = 0.0;
            for (std::int64_t p = 0; p < out_sp; ++p) s += row[p];
            grad_bias[static_cast<std::size_t>(co)] += s;
        }

        if (pointwise) {
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, kk, static_cast<blasint>(out_sp), 1.0, gyn, ld_y,
                        xn, ld_y, 1.0, grad_weight.data(), kk);
            if (want_x) {
                double* gxn = grad_x.data() + n * cd.in_channels * cd.in_spatial();
                cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kk, ld_y, m, 1.0, weight.data(), kk, gyn, ld_y,
                            1.0, gxn, ld_y);
            }
            continue;
        }

        for (std::int64_t oz0 = 0; oz0 < cd.out_d(); oz0 += slab) {
            const std::int64_t planes = std::min(slab, cd.out_d() - oz0);
            const auto p_count = static_cast<blasint>(planes * plane);
            const double* gy_slab = gyn + oz0 * plane;
            im2col(cd, xn, oz0, planes, col.data());
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, kk, p_count, 1.0, gy_slab, ld_y, col.data(),
                        p_count, 1.0, grad_weight.data(), kk);
            if (want_x) {
                cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kk, p_count, m, 1.0, weight.data(), kk, gy_slab,
                            ld_y, 0.0, gcol.data(), p_count);
                col2im(cd, gcol.data(), oz0, planes, grad_x.data() + n * cd.in_channels * cd.in_spatial());
            }
        }
    }
}

}  // namespace parallel

}  // namespace cranial::kernels

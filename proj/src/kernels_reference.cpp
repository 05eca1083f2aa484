#include "cranial/kernels.hpp"

namespace cranial::kernels::reference {

void conv3d_forward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
    const std::int64_t od = cd.out_d(), oh = cd.out_h(), ow = cd.out_w();
    for (std::int64_t n = 0; n < cd.batch; ++n)
        for (std::int64_t co = 0; co < cd.out_channels; ++co)
            for (std::int64_t oz = 0; oz < od; ++oz)
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        double acc = bias[static_cast<std::size_t>(co)];
                        for (std::int64_t ci = 0; ci < cd.in_channels; ++ci)
                            for (std::int64_t kz = 0; kz < cd.k_d; ++kz) {
                                const std::int64_t iz = oz * cd.stride - cd.pad + kz;
                                if (iz < 0 || iz >= cd.in_d) continue;
                                for (std::int64_t ky = 0; ky < cd.k_h; ++ky) {
                                    const std::int64_t iy = oy * cd.stride - cd.pad + ky;
                                    if (iy < 0 || iy >= cd.in_h) continue;
                                    for (std::int64_t kx = 0; kx < cd.k_w; ++kx) {
                                        const std::int64_t ix = ox * cd.stride - cd.pad + kx;
                                        if (ix < 0 || ix >= cd.in_w) continue;
                                        const auto xi = (((n * cd.in_channels + ci) * cd.in_d + iz) * cd.in_h + iy) *
                                                            cd.in_w + ix;
                                        const auto wi = (((co * cd.in_channels + ci) * cd.k_d + kz) * cd.k_h + ky) *
                                                            cd.k_w + kx;
                                        acc += x[static_cast<std::size_t>(xi)] * weight[static_cast<std::size_t>(wi)];
                                    }
                                }
                            }
                        y[static_cast<std::size_t>((((n * cd.out_channels + co) * od + oz) * oh + oy) * ow + ox)] = acc;
                    }
}

void conv3d_backward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
    const std::int64_t od = cd.out_d(), oh = cd.out_h(), ow = cd.out_w();
    const bool want_x = !grad_x.empty();
    for (std::int64_t n = 0; n < cd.batch; ++n)
        for (std::int64_t co = 0; co < cd.out_channels; ++co)
            for (std::int64_t oz = 0; oz < od; ++oz)
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const double g =
                            grad_y[static_cast<std::size_t>((((n * cd.out_channels + co) * od + oz) * oh + oy) * ow + ox)];
                        grad_bias[static_cast<std::size_t>(co)] += g;
                        for (std::int64_t ci = 0; ci < cd.in_channels; ++ci)
                            for (std::int64_t kz = 0; kz < cd.k_d; ++kz) {
                                const std::int64_t iz = oz * cd.stride - cd.pad + kz;
                                if (iz < 0 || iz >= cd.in_d) continue;
                                for (std::int64_t ky = 0; ky < cd.k_h; ++ky) {
                                    const std::int64_t iy = oy * cd.stride - cd.pad + ky;
                                    if (iy < 0 || iy >= cd.in_h) continue;
                                    for (std::int64_t kx = 0; kx < cd.k_w; ++kx) {
                                        const std::int64_t ix = ox * cd.stride - cd.pad + kx;
                                        if (ix < 0 || ix >= cd.in_w) continue;
                                        const auto xi = static_cast<std::size_t>(
                                            (((n * cd.in_channels + ci) * cd.in_d + iz) * cd.in_h + iy) * cd.in_w + ix);
                                        const auto wi = static_cast<std::size_t>(
                                            (((co * cd.in_channels + ci) * cd.k_d + kz) * cd.k_h + ky) * cd.k_w + kx);
                                        grad_weight[wi] += g * x[xi];
                                        if (want_x) grad_x[xi] += g * weight[wi];
                                    }
                                }
                            }
                    }
}

}  // namespace cranial::kernels::reference

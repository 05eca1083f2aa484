#pragma once

#include <cstdint>
#include <span>

namespace cranial::kernels {

/// Shape bookkeeping for a 3-D cross-correlation with cubic zero padding.
struct ConvDims {
    std::int64_t batch = 1;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
    std::int64_t in_d = 1, in_h = 1, in_w = 1;
    std::int64_t k_d = 1, k_h = 1, k_w = 1;
    std::int64_t stride = 1;
    std::int64_t pad = 0;

    std::int64_t out_d() const { return (in_d + 2 * pad - k_d) / stride + 1; }
    std::int64_t out_h() const { return (in_h + 2 * pad - k_h) / stride + 1; }
    std::int64_t out_w() const { return (in_w + 2 * pad - k_w) / stride + 1; }
    std::int64_t in_spatial() const { return in_d * in_h * in_w; }
    std::int64_t out_spatial() const { return out_d() * out_h() * out_w(); }
    std::int64_t kernel_volume() const { return k_d * k_h * k_w; }
};

// Layouts: x (batch, in_c, d, h, w); weight (out_c, in_c, kd, kh, kw);
// bias (out_c); y (batch, out_c, od, oh, ow). Backward accumulates (+=) into
// grad_weight / grad_bias and, when non-empty, grad_x.

namespace reference {

void conv3d_forward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);

void conv3d_backward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_weight,
                     std::span<double> grad_bias);

}  // namespace reference

namespace parallel {

// im2col over slabs of output planes + BLAS GEMM; the lowering and scatter
// loops run under OpenMP.
void conv3d_forward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);

void conv3d_backward(const ConvDims& cd, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_weight,
                     std::span<double> grad_bias);

}  // namespace parallel

enum class Backend { Parallel, Reference };

/// Process-wide choice used by the autograd conv op. Defaults to Parallel.
void set_backend(Backend b);
Backend backend();

}  // namespace cranial::kernels

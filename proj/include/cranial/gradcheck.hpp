#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cranial/autograd.hpp"
#include "cranial/model.hpp"

namespace cranial {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::int64_t entries_checked = 0;

    bool passed() const { return max_rel_error <= tolerance; }
};

/// Scale-normalized error of an analytic gradient against a numeric one:
///   max_i |a_i - n_i| / max(max_j |a_j|, max_j |n_j|).
/// Zero when both are identically zero.
double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Central difference (f(x + h e_i) - f(x - h e_i)) / 2h for each index in
/// `indices` of `target`, restoring the value afterwards.
std::vector<double> central_differences(const std::function<double()>& f, Tensor& target,
                                        const std::vector<std::int64_t>& indices, double step = 1e-6);

struct GradCheckOptions {
    std::uint64_t seed = 7;
    double step = 1e-6;
    double op_tolerance = 1e-5;
    double model_tolerance = 1e-4;
    /// Entries probed per parameter tensor in the end-to-end check (the
    /// largest-gradient entry is always included).
    int samples_per_parameter = 6;
};

/// Per-op checks (conv3d at several strides/paddings, leaky_relu, sigmoid,
/// upsample, concat, add, soft Dice) against central differences of
/// sum(R * op(...)) with random R, plus the end-to-end default model on a
/// 1x1x8^3 input: sampled entries of every parameter tensor and one
/// directional derivative along a random direction over all parameters.
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts = {});

/// End-to-end part only, for an arbitrary model configuration.
std::vector<GradCheckResult> check_model_gradients(const ModelConfig& cfg, const GradCheckOptions& opts);

}  // namespace cranial

#include "cranial/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cranial/rng.hpp"

namespace cranial {

double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    double scale = 0.0;
    double diff = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    }
    return scale == 0.0 ? 0.0 : diff / scale;
}

std::vector<double> central_differences(const std::function<double()>& f, Tensor& target,
                                        const std::vector<std::int64_t>& indices, double step) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const double saved = target[i];
        target[i] = saved + step;
        const double plus = f();
        target[i] = saved - step;
        const double minus = f();
        target[i] = saved;
        out.push_back((plus - minus) / (2.0 * step));
    }
    return out;
}

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Values bounded away from zero so FD steps never cross the leaky_relu kink.
Tensor away_from_zero(const Shape& s, Rng& rng) {
    Tensor t(s);
    for (auto& v : t.data()) {
        const double mag = rng.uniform(0.05, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

std::vector<std::int64_t> all_indices(const Tensor& t) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(t.numel()));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Checks every input of a graph builder. `inputs` are parameters; the scalar
// is sum(R * build(inputs)).
GradCheckResult check_op(const std::string& name, std::vector<Var> inputs,
                         const std::function<Var(const std::vector<Var>&)>& build, Rng& rng,
                         const GradCheckOptions& opts) {
    const Shape out_shape = build(inputs).shape();
    const Tensor probe = random_tensor(out_shape, rng);
    auto scalar = [&]() { return sum(weighted(build(inputs), probe)); };

    Var loss = scalar();
    backward(loss);

    GradCheckResult res{name, 0.0, opts.op_tolerance, 0};
    for (auto& in : inputs) {
        const std::vector<double> analytic(in.grad().data().begin(), in.grad().data().end());
        auto f = [&]() { return scalar().value()[0]; };
        const auto idx = all_indices(in.value());
        const auto numeric = central_differences(f, in.value(), idx, opts.step);
        res.max_rel_error = std::max(res.max_rel_error, gradient_relative_error(analytic, numeric));
        res.entries_checked += static_cast<std::int64_t>(idx.size());
    }
    return res;
}

Var conv_weight(std::int64_t out_c, std::int64_t in_c, std::int64_t k, Rng& rng) {
    return parameter(random_tensor(Shape{out_c, in_c, k, k, k}, rng));
}

}  // namespace

std::vector<GradCheckResult> check_model_gradients(const ModelConfig& cfg, const GradCheckOptions& opts) {
    Rng rng(derive(opts.seed, {tag("model-check")}));
    MicroUNet model(cfg, derive(opts.seed, {tag("model-init")}));
    // Nonzero biases so every path carries signal.
    for (auto& p : model.parameters()) {
        if (p.name.ends_with(".bias")) {
            for (auto& v : p.var.value().data()) v = rng.uniform(-0.1, 0.1);
        }
    }
    const std::int64_t side = 8;
    Tensor input(Shape{1, 1, side, side, side});
    Tensor target(Shape{1, 1, side, side, side});
    for (std::int64_t i = 0; i < input.numel(); ++i) {
        target[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
        input[i] = target[i] * (rng.uniform() < 0.8 ? 1.0 : 0.0);
    }
    const Var x = constant(input);
    auto loss_value = [&]() { return soft_dice_loss(model.forward(x), target).value()[0]; };

    model.zero_grad();
    backward(soft_dice_loss(model.forward(x), target));

    std::vector<GradCheckResult> results;
    GradCheckResult sampled{"model/sampled-entries", 0.0, opts.model_tolerance, 0};
    for (auto& p : model.parameters()) {
        const auto grad = p.var.grad().data();
        const auto n = static_cast<std::int64_t>(grad.size());
        std::vector<std::int64_t> idx;
        auto argmax = std::max_element(grad.begin(), grad.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
        idx.push_back(argmax - grad.begin());
        for (int s = 0; s < opts.samples_per_parameter && s < n; ++s) idx.push_back(rng.uniform_int(0, n - 1));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

        std::vector<double> analytic;
        for (auto i : idx) analytic.push_back(grad[static_cast<std::size_t>(i)]);
        const double tensor_scale = std::abs(*argmax);
        const auto numeric = central_differences(loss_value, p.var.value(), idx, opts.step);
        double scale = tensor_scale;
        double diff = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            scale = std::max(scale, std::abs(numeric[k]));
            diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
        }
        if (scale > 0.0) sampled.max_rel_error = std::max(sampled.max_rel_error, diff / scale);
        sampled.entries_checked += static_cast<std::int64_t>(idx.size());
    }
    results.push_back(sampled);

    // Directional derivative along v over every parameter entry at once.
    std::vector<std::vector<double>> direction;
    double analytic_dir = 0.0;
    std::int64_t total = 0;
    for (auto& p : model.parameters()) {
        std::vector<double> v(static_cast<std::size_t>(p.var.value().numel()));
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = rng.uniform(-1.0, 1.0);
            analytic_dir += v[k] * p.var.grad().data()[k];
        }
        total += static_cast<std::int64_t>(v.size());
        direction.push_back(std::move(v));
    }
    auto shifted = [&](double t) {
        auto& params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto w = params[i].var.value().data();
            for (std::size_t k = 0; k < w.size(); ++k) w[k] += t * direction[i][k];
        }
    };
    shifted(opts.step);
    const double plus = loss_value();
    shifted(-2.0 * opts.step);
    const double minus = loss_value();
    shifted(opts.step);
    const double numeric_dir = (plus - minus) / (2.0 * opts.step);
    const double scale = std::max(std::abs(analytic_dir), std::abs(numeric_dir));
    results.push_back({"model/directional", scale == 0.0 ? 0.0 : std::abs(analytic_dir - numeric_dir) / scale,
                       opts.model_tolerance, total});
    return results;
}

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts) {
    Rng rng(derive(opts.seed, {tag("op-check")}));
    std::vector<GradCheckResult> results;

    struct ConvCase {
        const char* name;
        Shape x;
        std::int64_t out_c, k;
        int stride, pad;
    };
    const ConvCase conv_cases[] = {
        {"conv3d/k3-s1-p1", Shape{2, 2, 4, 5, 3}, 3, 3, 1, 1},
        {"conv3d/k3-s2-p1", Shape{1, 2, 6, 5, 4}, 2, 3, 2, 1},
        {"conv3d/k1-s1-p0", Shape{2, 3, 3, 3, 2}, 2, 1, 1, 0},
        {"conv3d/k3-s1-p0", Shape{1, 1, 5, 4, 6}, 2, 3, 1, 0},
    };
    for (const auto& c : conv_cases) {
        std::vector<Var> in{parameter(random_tensor(c.x, rng)), conv_weight(c.out_c, c.x.c, c.k, rng),
                            parameter(random_tensor(Shape{1, c.out_c, 1, 1, 1}, rng))};
        const int stride = c.stride, pad = c.pad;
        results.push_back(check_op(
            c.name, in, [stride, pad](const std::vector<Var>& v) { return conv3d(v[0], v[1], v[2], stride, pad); },
            rng, opts));
    }

    const Shape s{2, 2, 3, 4, 3};
    results.push_back(check_op(
        "leaky_relu", {parameter(away_from_zero(s, rng))},
        [](const std::vector<Var>& v) { return leaky_relu(v[0]); }, rng, opts));
    results.push_back(check_op(
        "sigmoid", {parameter(random_tensor(s, rng, -3.0, 3.0))},
        [](const std::vector<Var>& v) { return sigmoid(v[0]); }, rng, opts));
    results.push_back(check_op(
        "upsample_nearest2x", {parameter(random_tensor(s, rng))},
        [](const std::vector<Var>& v) { return upsample_nearest2x(v[0]); }, rng, opts));
    results.push_back(check_op(
        "concat_channels", {parameter(random_tensor(s, rng)), parameter(random_tensor(Shape{2, 3, 3, 4, 3}, rng))},
        [](const std::vector<Var>& v) { return concat_channels(v[0], v[1]); }, rng, opts));
    results.push_back(check_op(
        "add", {parameter(random_tensor(s, rng)), parameter(random_tensor(s, rng))},
        [](const std::vector<Var>& v) { return add(v[0], v[1]); }, rng, opts));

    Tensor target(s);
    for (auto& v : target.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    results.push_back(check_op(
        "soft_dice_loss", {parameter(random_tensor(s, rng, 0.05, 0.95))},
        [target](const std::vector<Var>& v) { return soft_dice_loss(v[0], target); }, rng, opts));

    for (auto& r : check_model_gradients(ModelConfig{}, opts)) results.push_back(std::move(r));
    return results;
}

}  // namespace cranial

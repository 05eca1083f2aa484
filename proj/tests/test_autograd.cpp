#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "cranial/autograd.hpp"
#include "cranial/gradcheck.hpp"
#include "cranial/kernels.hpp"

using namespace cranial;
using testing_util::kind_of;

TEST_CASE("elementwise op values") {
    Tensor t(Shape{1, 1, 1, 1, 3}, {-2.0, 0.0, 3.0});
    const auto r = leaky_relu(constant(t)).value();
    CHECK(r[0] == -0.02);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 3.0);
    const auto s = sigmoid(constant(t)).value();
    CHECK(s[1] == 0.5);
    CHECK(s[0] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("upsample copies 2x2x2 blocks") {
    Tensor t(Shape{1, 2, 2, 3, 2});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = double(i);
    const auto u = upsample_nearest2x(constant(t)).value();
    CHECK(u.shape() == Shape{1, 2, 4, 6, 4});
    for (std::int64_t c = 0; c < 2; ++c)
        for (std::int64_t z = 0; z < 4; ++z)
            for (std::int64_t y = 0; y < 6; ++y)
                for (std::int64_t x = 0; x < 4; ++x) CHECK(u.at(0, c, z, y, x) == t.at(0, c, z / 2, y / 2, x / 2));
}

TEST_CASE("concat and shape errors") {
    const Var a = constant(Tensor(Shape{1, 2, 2, 2, 2}, 1.0));
    const Var b = constant(Tensor(Shape{1, 3, 2, 2, 2}, 2.0));
    const auto c = concat_channels(a, b).value();
    CHECK(c.shape() == Shape{1, 5, 2, 2, 2});
    CHECK(c.at(0, 1, 1, 1, 1) == 1.0);
    CHECK(c.at(0, 2, 0, 0, 0) == 2.0);
    CHECK(kind_of([&] { (void)add(a, b); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { (void)concat_channels(a, constant(Tensor(Shape{1, 1, 2, 2, 3}))); }) ==
          ErrorKind::ShapeMismatch);
}

TEST_CASE("soft dice closed form") {
    const std::int64_t n = 64;
    for (std::int64_t k : {0, 1, 20, 64}) {
        Tensor target(Shape{1, 1, 4, 4, 4});
        for (std::int64_t i = 0; i < k; ++i) target[i] = 1.0;
        const auto loss = soft_dice_loss(constant(Tensor(target.shape(), 0.5)), target).value()[0];
        const double eps = 1e-5;
        CHECK(loss == doctest::Approx(1.0 - (double(k) + eps) / (double(n) / 2 + double(k) + eps)).epsilon(1e-14));
    }
    Tensor t(Shape{1, 1, 2, 2, 2});
    t[3] = 1.0;
    CHECK(soft_dice_loss(constant(t), t).value()[0] == doctest::Approx(0.0).epsilon(1e-12));
    // Batch items are averaged.
    Tensor two(Shape{2, 1, 1, 1, 2}, {1, 0, 1, 1});
    Tensor pred(Shape{2, 1, 1, 1, 2}, {1, 0, 0, 0});
    const double per0 = 0.0, per1 = 1.0 - 1e-5 / (2.0 + 1e-5);
    CHECK(soft_dice_loss(constant(pred), two).value()[0] == doctest::Approx((per0 + per1) / 2).epsilon(1e-12));
}

TEST_CASE("backward accumulates through shared nodes") {
    Var x = parameter(Tensor(Shape{1, 1, 1, 1, 2}, {1.5, -2.0}));
    backward(sum(add(x, x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
    x.zero_grad();
    backward(sum(leaky_relu(x)));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.01);
    CHECK(kind_of([&] { backward(x); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("gradient check suite passes on both backends") {
    for (auto b : {kernels::Backend::Parallel, kernels::Backend::Reference}) {
        kernels::set_backend(b);
        for (const auto& r : run_gradcheck_suite({})) {
            INFO(r.name, " rel err ", r.max_rel_error);
            CHECK(r.passed());
            CHECK(r.entries_checked > 0);
        }
    }
    kernels::set_backend(kernels::Backend::Parallel);
}

TEST_CASE("relative error helper") {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.5};
    CHECK(gradient_relative_error(a, b) == 0.5 / 2.5);
    CHECK(gradient_relative_error(std::vector<double>{0.0}, std::vector<double>{0.0}) == 0.0);
}

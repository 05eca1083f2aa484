#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "cranial/checkpoint.hpp"
#include "cranial/optim.hpp"

using namespace cranial;
using testing_util::kind_of;

namespace {

std::vector<NamedParam> single(double w, double g) {
    Var v = parameter(Tensor(Shape{1, 1, 1, 1, 1}, w));
    v.grad() = Tensor(v.shape(), g);
    return {{"w", v}};
}

}  // namespace

TEST_CASE("zero gradient only decays weights") {
    AdamWConfig cfg;
    cfg.weight_decay = 0.01;
    auto p = single(2.0, 0.0);
    AdamW opt(cfg, p);
    opt.step(p, 0.001);
    CHECK(p[0].var.value()[0] == doctest::Approx(2.0 * (1.0 - 1e-5)).epsilon(1e-15));
}

TEST_CASE("hand-computed AdamW steps") {
    AdamWConfig cfg;
    auto p = single(0.5, 0.2);
    AdamW opt(cfg, p);
    double w = 0.5, m = 0.0, v = 0.0;
    const double grads[] = {0.2, -0.1, 0.4};
    for (int t = 1; t <= 3; ++t) {
        const double g = grads[t - 1];
        p[0].var.grad()[0] = g;
        opt.step(p, 0.01);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        w -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * w);
        CHECK(p[0].var.value()[0] == doctest::Approx(w).epsilon(1e-14));
    }
    CHECK(opt.steps() == 3);
    // First step moves by about lr regardless of gradient scale.
    auto q = single(0.0, 1e-3);
    AdamW o2(AdamWConfig{.weight_decay = 0.0}, q);
    o2.step(q, 0.01);
    CHECK(q[0].var.value()[0] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("learning-rate schedule") {
    const AdamWConfig cfg;
    CHECK(lr_at_epoch(cfg, 0) == 0.001);
    CHECK(lr_at_epoch(cfg, 1) == doctest::Approx(0.000995).epsilon(1e-15));
    CHECK(lr_at_epoch(cfg, 1200) == doctest::Approx(2.44e-6).epsilon(0.005));
    CHECK(kind_of([&] { (void)lr_at_epoch(cfg, -1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("non-finite gradient leaves state untouched") {
    MicroUNet model(ModelConfig{2, 2}, 1);
    AdamW opt(AdamWConfig{}, model.parameters());
    for (auto& p : model.parameters()) p.var.grad() = Tensor(p.var.shape(), 0.1);
    opt.step(model.parameters(), 0.001);
    const auto before_w = model.parameters().back().var.value().storage();
    const auto before_m = opt.first_moments();
    model.parameters().back().var.grad()[0] = std::nan("");
    CHECK(kind_of([&] { opt.step(model.parameters(), 0.001); }) == ErrorKind::NonFiniteGradient);
    CHECK(model.parameters().back().var.value().storage() == before_w);
    CHECK(opt.first_moments() == before_m);
    CHECK(opt.steps() == 1);
    AdamWConfig bad;
    bad.lr = 0.0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = testing_util::scratch_dir("ckpt");
    MicroUNet model(ModelConfig{2, 3}, 4);
    AdamW opt(AdamWConfig{.lr = 0.002}, model.parameters());
    for (auto& p : model.parameters()) p.var.grad() = Tensor(p.var.shape(), 0.3);
    opt.step(model.parameters(), 0.002);
    save_checkpoint(dir / "m", model, opt, {7, 99, "abcdef0123456789"});

    for (const auto& path : {dir / "m", dir / "m.json", dir / "m.bin"}) {
        const auto ck = load_checkpoint(path);
        CHECK(ck.meta.epoch == 7);
        CHECK(ck.meta.seed == 99);
        CHECK(ck.meta.config_hash == "abcdef0123456789");
        CHECK(ck.optim.steps() == 1);
        CHECK(ck.optim.config().lr == 0.002);
        CHECK(ck.optim.first_moments() == opt.first_moments());
        CHECK(ck.optim.second_moments() == opt.second_moments());
        REQUIRE(ck.model.parameters().size() == model.parameters().size());
        for (std::size_t i = 0; i < model.parameters().size(); ++i) {
            CHECK(ck.model.parameters()[i].name == model.parameters()[i].name);
            CHECK(std::ranges::equal(ck.model.parameters()[i].var.value().data(), model.parameters()[i].var.value().data()));
        }
    }
    CHECK(kind_of([&] { (void)load_checkpoint(dir / "nope"); }) == ErrorKind::IoError);
    std::filesystem::resize_file(dir / "m.bin", 16);
    CHECK(kind_of([&] { (void)load_checkpoint(dir / "m"); }) == ErrorKind::DimensionError);
}

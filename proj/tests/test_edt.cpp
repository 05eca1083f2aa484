#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "cranial/edt.hpp"
#include "support.hpp"

using namespace cranial;

TEST_CASE("closed forms") {
    CHECK(testing_util::kind_of([] { (void)edt(VoxelGrid(Index3{3, 3, 3})); }) == ErrorKind::EmptyVolume);
    const auto full = VoxelGrid(Index3{5, 4, 3}).complement();
    for (double v : edt(full).values) CHECK(v == 0.0);

    VoxelGrid one(Geometry{{3, 3, 3}, {1.0, 2.0, 3.0}});
    one.set(0, 0, 0, true);
    CHECK(edt(one).at(1, 1, 1) == std::sqrt(1.0 + 4.0 + 9.0));
    CHECK(edt_squared(one, {1, 1, 1}).at(2, 2, 2) == 12.0);
}

TEST_CASE("squared EDT equals the brute-force minimum bit for bit") {
    Rng rng(21);
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const Geometry geom{oracle::random_dims(rng, 1, 16), oracle::random_spacing(rng)};
        const double density = rng.uniform() < 0.5 ? rng.uniform(0.001, 0.05) : rng.uniform(0.05, 0.9);
        auto g = oracle::noise_mask(rng, geom, density);
        if (g.empty()) g.set(0, true);
        const auto fast = edt_squared(g).values;
        const auto slow = oracle::edt_squared(g, geom.spacing);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            if (fast[i] != slow[i]) FAIL("voxel " << i << ": " << fast[i] << " vs " << slow[i]);
        }
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("distance is 1-Lipschitz along each axis in mm") {
    Rng rng(22);
    const Geometry geom{{12, 10, 9}, {0.6, 1.3, 0.9}};
    const auto g = oracle::noise_mask(rng, geom, 0.02);
    const auto d = edt(g);
    for (std::int64_t z = 0; z < 9; ++z)
        for (std::int64_t y = 0; y < 10; ++y)
            for (std::int64_t x = 0; x + 1 < 12; ++x)
                CHECK(std::abs(d.at(x + 1, y, z) - d.at(x, y, z)) <= 0.6 + 1e-12);
}

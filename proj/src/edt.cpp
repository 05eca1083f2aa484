#include "cranial/edt.hpp"

#include <cmath>
#include <limits>

#include "cranial/error.hpp"

namespace cranial {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance along one axis, computed identically everywhere so the
// oracle in the tests can reproduce the exact bits.
inline double axis_term(std::int64_t d, double spacing) {
    const double t = static_cast<double>(d) * spacing;
    return t * t;
}

// First pass: 1-D distance to the nearest foreground voxel on the line.
void line_nearest(const std::uint8_t* fg, std::int64_t n, double spacing, double* out, std::int64_t* scratch) {
    std::int64_t last = -1;
    for (std::int64_t i = 0; i < n; ++i) {
        if (fg[i]) last = i;
        scratch[i] = last;
    }
    last = -1;
    for (std::int64_t i = n - 1; i >= 0; --i) {
        if (fg[i]) last = i;
        std::int64_t best = -1;
        if (scratch[i] >= 0) best = i - scratch[i];
        if (last >= 0 && (best < 0 || last - i < best)) best = last - i;
        out[i] = best < 0 ? kInf : axis_term(best, spacing);
    }
}

struct EnvelopeScratch {
    std::vector<std::int64_t> v;
    std::vector<double> z;
    std::vector<double> f;
    std::vector<double> out;
    explicit EnvelopeScratch(std::int64_t n)
        : v(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) + 1), f(static_cast<std::size_t>(n)),
          out(static_cast<std::size_t>(n)) {}
};

// Lower envelope of parabolas  q -> ((q - v) s)^2 + f[v]  over finite f[v].
// The query step re-checks neighbouring parabolas by direct evaluation so the
// result is the exact floating-point minimum even when an intersection
// abscissa is rounded.
void envelope_1d(EnvelopeScratch& s, std::int64_t n, double spacing) {
    const double s2 = spacing * spacing;
    auto& v = s.v;
    auto& z = s.z;
    const auto& f = s.f;
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        const double fq = f[static_cast<std::size_t>(q)];
        if (fq == kInf) continue;
        const double qq = static_cast<double>(q);
        while (k >= 0) {
            const std::int64_t vk = v[static_cast<std::size_t>(k)];
            const double vv = static_cast<double>(vk);
            const double sect =
                ((fq + qq * qq * s2) - (f[static_cast<std::size_t>(vk)] + vv * vv * s2)) / (2.0 * s2 * (qq - vv));
            if (sect <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                ++k;
                v[static_cast<std::size_t>(k)] = q;
                z[static_cast<std::size_t>(k)] = sect;
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
        }
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        for (std::int64_t q = 0; q < n; ++q) s.out[static_cast<std::size_t>(q)] = kInf;
        return;
    }
    const std::int64_t count = k + 1;
    auto eval = [&](std::int64_t idx, std::int64_t q) {
        const std::int64_t vi = v[static_cast<std::size_t>(idx)];
        return axis_term(q - vi, spacing) + f[static_cast<std::size_t>(vi)];
    };
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (j + 1 < count && z[static_cast<std::size_t>(j) + 1] < static_cast<double>(q)) ++j;
        double best = eval(j, q);
        if (j > 0) best = std::min(best, eval(j - 1, q));
        if (j + 1 < count) best = std::min(best, eval(j + 1, q));
        s.out[static_cast<std::size_t>(q)] = best;
    }
}

}  // namespace

ScalarField edt_squared(const VoxelGrid& g, const Vec3& spacing) {
    if (g.empty()) throw Error(ErrorKind::EmptyVolume, "edt of empty grid " + describe(g.geometry()));
    const auto& d = g.dims();
    const std::int64_t nx = d[0], ny = d[1], nz = d[2];
    ScalarField field{g.geometry(), std::vector<double>(static_cast<std::size_t>(g.size()))};
    double* out = field.values.data();
    const auto bytes = g.to_bytes();

#pragma omp parallel
    {
        std::vector<std::int64_t> scratch(static_cast<std::size_t>(nx));
#pragma omp for schedule(static)
        for (std::int64_t line = 0; line < ny * nz; ++line) {
            const std::int64_t base = line * nx;
            line_nearest(bytes.data() + base, nx, spacing[0], out + base, scratch.data());
        }
    }

    // y then z passes over strided lines.
    const std::int64_t strides[3] = {1, nx, nx * ny};
    for (int axis = 1; axis < 3; ++axis) {
        const std::int64_t n = d[axis];
        const std::int64_t stride = strides[axis];
        const std::int64_t lines = g.size() / n;
#pragma omp parallel
        {
            EnvelopeScratch scratch(n);
#pragma omp for schedule(static)
            for (std::int64_t line = 0; line < lines; ++line) {
                std::int64_t base;
                if (axis == 1) {
                    base = (line % nx) + (line / nx) * nx * ny;
                } else {
                    base = line;
                }
                for (std::int64_t i = 0; i < n; ++i) {
                    scratch.f[static_cast<std::size_t>(i)] = out[base + i * stride];
                }
                envelope_1d(scratch, n, spacing[axis]);
                for (std::int64_t i = 0; i < n; ++i) {
                    out[base + i * stride] = scratch.out[static_cast<std::size_t>(i)];
                }
            }
        }
    }
    return field;
}

ScalarField edt_squared(const VoxelGrid& g) { return edt_squared(g, g.spacing()); }

ScalarField edt(const VoxelGrid& g) {
    ScalarField f = edt_squared(g);
    for (auto& v : f.values) v = std::sqrt(v);
    return f;
}

}  // namespace cranial

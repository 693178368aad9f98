#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "longreg/ffd.hpp"
#include "longreg/losses.hpp"
#include "longreg/rng.hpp"

using namespace longreg;

namespace {

// Soft ball of the given radius; edges fall off over one voxel.
Volume3D ball(Dims3 d, float cx, float cy, float cz, float r) {
    Volume3D v(d, {1, 1, 1});
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x) {
                const float dist = std::sqrt((x - cx) * (x - cx) +
                                             (y - cy) * (y - cy) +
                                             (z - cz) * (z - cz));
                v.at(x, y, z) = std::clamp(r - dist + 0.5f, 0.f, 1.f);
            }
    return v;
}

} // namespace

TEST_CASE("bspline basis") {
    SUBCASE("t=0 recovers (1,4,1)/6") {
        const auto w = bspline_weights(0.0);
        CHECK(w[0] == doctest::Approx(1.0 / 6));
        CHECK(w[1] == doctest::Approx(4.0 / 6));
        CHECK(w[2] == doctest::Approx(1.0 / 6));
        CHECK(w[3] == doctest::Approx(0.0));
    }
    SUBCASE("t=0.5 is symmetric") {
        const auto w = bspline_weights(0.5);
        CHECK(w[0] == doctest::Approx(w[3]));
        CHECK(w[1] == doctest::Approx(w[2]));
    }
    SUBCASE("partition of unity") {
        for (double t = 0.0; t < 1.0; t += 0.093) {
            const auto w = bspline_weights(t);
            CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0));
        }
    }
    SUBCASE("domain is [0,1)") {
        CHECK_THROWS_AS(bspline_weights(1.0), std::invalid_argument);
        CHECK_THROWS_AS(bspline_weights(-0.1), std::invalid_argument);
    }
}

TEST_CASE("ffd_to_ddf") {
    const Dims3 dims = {17, 13, 11};
    const Spacing3 sp = {1, 1, 1};

    SUBCASE("zero controls give the zero field") {
        const FFDGrid g = make_ffd_grid(dims, 4);
        const DDF d = ffd_to_ddf(g, dims, sp);
        for (float x : d.disp) CHECK(x == 0.f);
    }
    SUBCASE("constant controls give the constant field") {
        FFDGrid g = make_ffd_grid(dims, 4);
        for (std::size_t i = 0; i < g.points(); ++i) {
            g.disp[3 * i + 0] = 1.5f;
            g.disp[3 * i + 1] = -0.5f;
            g.disp[3 * i + 2] = 2.f;
        }
        const DDF d = ffd_to_ddf(g, dims, sp);
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            CHECK(d.disp[3 * i + 0] == doctest::Approx(1.5f));
            CHECK(d.disp[3 * i + 1] == doctest::Approx(-0.5f));
            CHECK(d.disp[3 * i + 2] == doctest::Approx(2.f));
        }
    }
    SUBCASE("parallel and reference versions agree") {
        FFDGrid g = make_ffd_grid(dims, 5);
        Rng rng(2);
        for (auto& x : g.disp) x = float(rng.uniform(-2, 2));
        const DDF a = ffd_to_ddf(g, dims, sp);
        const DDF b = ref::ffd_to_ddf(g, dims, sp);
        REQUIRE(a.disp.size() == b.disp.size());
        for (std::size_t i = 0; i < a.disp.size(); ++i)
            CHECK(a.disp[i] == doctest::Approx(b.disp[i]).epsilon(1e-6));
    }
    SUBCASE("undersized lattice rejected") {
        FFDGrid g = make_ffd_grid({8, 8, 8}, 4);
        CHECK_THROWS_AS(ffd_to_ddf(g, {30, 30, 30}, sp), std::invalid_argument);
    }
}

TEST_CASE("ffd adjoint") {
    // <J c, g> over voxels must equal <c, J^T g> over controls.
    const Dims3 dims = {12, 10, 9};
    FFDGrid g = make_ffd_grid(dims, 4);
    Rng rng(7);
    for (auto& x : g.disp) x = float(rng.uniform(-1, 1));

    const DDF dense = ffd_to_ddf(g, dims, {1, 1, 1});
    std::vector<float> gdense(dense.disp.size());
    for (auto& x : gdense) x = float(rng.uniform(-1, 1));

    std::vector<float> gctrl;
    ffd_ctrl_grad(g, dims, gdense, gctrl);
    REQUIRE(gctrl.size() == g.disp.size());

    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < gdense.size(); ++i)
        lhs += double(dense.disp[i]) * gdense[i];
    for (std::size_t i = 0; i < gctrl.size(); ++i)
        rhs += double(g.disp[i]) * gctrl[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("ffd_register") {
    const Dims3 dims = {24, 24, 24};

    SUBCASE("self-registration stays put") {
        const Volume3D v = ball(dims, 12, 12, 12, 6);
        FfdConfig cfg;
        cfg.iterations = 40;
        const FfdResult r = ffd_register(v, v, cfg);
        CHECK(r.trace.back() < 1e-8);
        for (float x : r.ddf.disp) CHECK(std::abs(x) < 1e-4f);
    }
    SUBCASE("loss decreases on a small translation") {
        const Volume3D fixed = ball(dims, 12, 12, 12, 6);
        const Volume3D moving = ball(dims, 11, 12, 12, 6);
        FfdConfig cfg;
        cfg.iterations = 60;
        const FfdResult r = ffd_register(moving, fixed, cfg);
        CHECK(r.trace.back() < 0.5 * r.trace.front());
    }
    SUBCASE("recovers a one-voxel shift in the object region") {
        const Volume3D fixed = ball(dims, 12, 12, 12, 6);
        const Volume3D moving = ball(dims, 11, 12, 12, 6);
        // warped(x) = moving(x + d): landing on the moving ball needs d = -1
        FfdConfig cfg;
        cfg.iterations = 200;
        const FfdResult r = ffd_register(moving, fixed, cfg);
        double mean_dx = 0;
        long n = 0;
        for (int z = 0; z < dims[2]; ++z)
            for (int y = 0; y < dims[1]; ++y)
                for (int x = 0; x < dims[0]; ++x)
                    if (fixed.at(x, y, z) >= 0.5f) {
                        mean_dx += r.ddf.component(x, y, z, 0);
                        ++n;
                    }
        mean_dx /= double(n);
        CHECK(mean_dx == doctest::Approx(-1.0).epsilon(0.35));
    }
}

#include "longreg/ffd.hpp"

#include <cmath>
#include <stdexcept>

#include "longreg/kern/bending.hpp"
#include "longreg/kern/common.hpp"
#include "longreg/kern/interp.hpp"
#include "longreg/kern/lossmath.hpp"

namespace longreg {

FFDGrid make_ffd_grid(const Dims3& image_dims, int spacing) {
    if (spacing < 1) throw std::invalid_argument("ffd: control spacing < 1");
    FFDGrid g;
    g.spacing = spacing;
    for (int a = 0; a < 3; ++a)
        g.lattice[a] = (image_dims[a] - 1) / spacing + 4;
    g.disp.assign(3 * g.points(), 0.0f);
    return g;
}

std::array<double, 4> bspline_weights(double t) {
    if (!(t >= 0.0 && t < 1.0))
        throw std::invalid_argument("bspline_weights: t outside [0,1)");
    const double t2 = t * t, t3 = t2 * t;
    return {(1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
}

namespace {

struct AxisTables {
    std::vector<int> cell;
    std::vector<std::array<double, 4>> w;
};

AxisTables axis_tables(int n, int spacing) {
    AxisTables t;
    t.cell.resize(std::size_t(n));
    t.w.resize(std::size_t(n));
    for (int x = 0; x < n; ++x) {
        const int ix = x / spacing;
        t.cell[std::size_t(x)] = ix;
        t.w[std::size_t(x)] =
            bspline_weights(double(x - ix * spacing) / spacing);
    }
    return t;
}

void check_coverage(const FFDGrid& grid, const Dims3& image_dims) {
    for (int a = 0; a < 3; ++a) {
        const int need = (image_dims[a] - 1) / grid.spacing + 4;
        if (grid.lattice[a] < need)
            throw std::invalid_argument("ffd: lattice does not cover image");
    }
}

} // namespace

DDF ffd_to_ddf(const FFDGrid& grid, const Dims3& image_dims,
               const Spacing3& spacing) {
    check_coverage(grid, image_dims);
    const auto tx = axis_tables(image_dims[0], grid.spacing);
    const auto ty = axis_tables(image_dims[1], grid.spacing);
    const auto tz = axis_tables(image_dims[2], grid.spacing);
    const Dims3 lat = grid.lattice;
    DDF out;
    out.dims = image_dims;
    out.spacing = spacing;
    out.disp.assign(3 * voxel_count(image_dims), 0.0f);
#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < image_dims[2]; ++z)
        for (int y = 0; y < image_dims[1]; ++y)
            for (int x = 0; x < image_dims[0]; ++x) {
                double acc[3] = {0.0, 0.0, 0.0};
                for (int c3 = 0; c3 < 4; ++c3) {
                    const double wz = tz.w[std::size_t(z)][std::size_t(c3)];
                    const int az = tz.cell[std::size_t(z)] + c3;
                    for (int c2 = 0; c2 < 4; ++c2) {
                        const double wyz =
                            wz * ty.w[std::size_t(y)][std::size_t(c2)];
                        const int ay = ty.cell[std::size_t(y)] + c2;
                        for (int c1 = 0; c1 < 4; ++c1) {
                            const double w =
                                wyz * tx.w[std::size_t(x)][std::size_t(c1)];
                            const int ax = tx.cell[std::size_t(x)] + c1;
                            const std::size_t ci =
                                kern::lindex(lat, ax, ay, az);
                            for (int c = 0; c < 3; ++c)
                                acc[c] += w * double(grid.disp[3 * ci + c]);
                        }
                    }
                }
                const std::size_t i = kern::lindex(image_dims, x, y, z);
                for (int c = 0; c < 3; ++c)
                    out.disp[3 * i + c] = float(acc[c]);
            }
    return out;
}

void ffd_ctrl_grad(const FFDGrid& grid, const Dims3& image_dims,
                   const std::vector<float>& gdense,
                   std::vector<float>& gctrl) {
    check_coverage(grid, image_dims);
    if (gdense.size() != 3 * voxel_count(image_dims))
        throw std::invalid_argument("ffd_ctrl_grad: bad gradient size");
    gctrl.assign(3 * grid.points(), 0.0f);
    const auto tx = axis_tables(image_dims[0], grid.spacing);
    const auto ty = axis_tables(image_dims[1], grid.spacing);
    const auto tz = axis_tables(image_dims[2], grid.spacing);
    const Dims3 lat = grid.lattice;
    const int s = grid.spacing;
    auto xrange = [&](int a, int n, int& lo, int& hi) {
        lo = std::max(0, (a - 3) * s);
        hi = std::min(n - 1, (a + 1) * s - 1);
    };
#pragma omp parallel for collapse(2) schedule(static)
    for (int az = 0; az < lat[2]; ++az)
        for (int ay = 0; ay < lat[1]; ++ay)
            for (int ax = 0; ax < lat[0]; ++ax) {
                double acc[3] = {0.0, 0.0, 0.0};
                int zlo, zhi, ylo, yhi, xlo, xhi;
                xrange(az, image_dims[2], zlo, zhi);
                xrange(ay, image_dims[1], ylo, yhi);
                xrange(ax, image_dims[0], xlo, xhi);
                for (int z = zlo; z <= zhi; ++z) {
                    const int jz = az - tz.cell[std::size_t(z)];
                    if (jz < 0 || jz > 3) continue;
                    const double wz = tz.w[std::size_t(z)][std::size_t(jz)];
                    for (int y = ylo; y <= yhi; ++y) {
                        const int jy = ay - ty.cell[std::size_t(y)];
                        if (jy < 0 || jy > 3) continue;
                        const double wyz =
                            wz * ty.w[std::size_t(y)][std::size_t(jy)];
                        for (int x = xlo; x <= xhi; ++x) {
                            const int jx = ax - tx.cell[std::size_t(x)];
                            if (jx < 0 || jx > 3) continue;
                            const double w =
                                wyz * tx.w[std::size_t(x)][std::size_t(jx)];
                            const std::size_t i =
                                kern::lindex(image_dims, x, y, z);
                            for (int c = 0; c < 3; ++c)
                                acc[c] += w * double(gdense[3 * i + c]);
                        }
                    }
                }
                const std::size_t ci = kern::lindex(lat, ax, ay, az);
                for (int c = 0; c < 3; ++c) gctrl[3 * ci + c] += float(acc[c]);
            }
}

FfdResult ffd_register(const Volume3D& moving, const Volume3D& fixed,
                       const FfdConfig& cfg) {
    if (moving.dims != fixed.dims)
        throw std::invalid_argument("ffd_register: dim mismatch");
    if (cfg.iterations < 1)
        throw std::invalid_argument("ffd_register: iterations < 1");
    FFDGrid grid = make_ffd_grid(moving.dims, cfg.cp_spacing);
    const Dims3 d = moving.dims;
    const std::size_t n = voxel_count(d);
    FfdResult res;
    std::vector<float> warped(n), gwarp(n), gdense(3 * n), gctrl;
    DDF ddf;
    for (int it = 0; it < cfg.iterations; ++it) {
        ddf = ffd_to_ddf(grid, d, moving.spacing);
        const auto dview =
            kern::ConstVecFieldView<float>::interleaved(ddf.disp.data());
        kern::warp_fwd(moving.data.data(), d, dview, warped.data());
        const double loss =
            kern::ssd_fwd(warped.data(), fixed.data.data(), n) +
            cfg.gamma_be *
                kern::bending_fwd(dview, d);
        res.trace.push_back(loss);
        if (!std::isfinite(loss))
            throw std::runtime_error("ffd_register: non-finite loss at iteration " +
                                     std::to_string(it));
        std::fill(gwarp.begin(), gwarp.end(), 0.0f);
        kern::ssd_bwd(warped.data(), fixed.data.data(), n, 1.0, gwarp.data(),
                      static_cast<float*>(nullptr));
        std::fill(gdense.begin(), gdense.end(), 0.0f);
        kern::warp_bwd_disp(moving.data.data(), d, dview, gwarp.data(),
                            kern::VecFieldView<float>::interleaved(gdense.data()));
        if (cfg.gamma_be != 0.0)
            kern::bending_bwd(dview, d, cfg.gamma_be,
                              kern::VecFieldView<float>::interleaved(gdense.data()));
        ffd_ctrl_grad(grid, d, gdense, gctrl);
        for (std::size_t i = 0; i < grid.disp.size(); ++i)
            grid.disp[i] -= float(cfg.lr * double(gctrl[i]));
    }
    res.ddf = ffd_to_ddf(grid, d, moving.spacing);
    return res;
}

namespace ref {

DDF ffd_to_ddf(const FFDGrid& grid, const Dims3& image_dims,
               const Spacing3& spacing) {
    DDF out;
    out.dims = image_dims;
    out.spacing = spacing;
    out.disp.assign(3 * voxel_count(image_dims), 0.0f);
    for (int z = 0; z < image_dims[2]; ++z)
        for (int y = 0; y < image_dims[1]; ++y)
            for (int x = 0; x < image_dims[0]; ++x) {
                const int iz = z / grid.spacing, iy = y / grid.spacing,
                          ix = x / grid.spacing;
                const auto wz = bspline_weights(
                    double(z - iz * grid.spacing) / grid.spacing);
                const auto wy = bspline_weights(
                    double(y - iy * grid.spacing) / grid.spacing);
                const auto wx = bspline_weights(
                    double(x - ix * grid.spacing) / grid.spacing);
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b)
                            for (int cc = 0; cc < 4; ++cc)
                                acc += wz[std::size_t(a)] * wy[std::size_t(b)] *
                                       wx[std::size_t(cc)] *
                                       double(grid.disp
                                                  [3 * kern::lindex(
                                                           grid.lattice,
                                                           ix + cc, iy + b,
                                                           iz + a) +
                                                   std::size_t(c)]);
                    out.disp[3 * kern::lindex(image_dims, x, y, z) +
                             std::size_t(c)] = float(acc);
                }
            }
    return out;
}

} // namespace ref

} // namespace longreg

#ifndef LONGREG_KERN_BENDING_HPP
#define LONGREG_KERN_BENDING_HPP

#include <cstddef>
#include <vector>

#include "longreg/kern/common.hpp"

namespace longreg::kern {

namespace detail {

template <typename T>
inline double rd0(const std::vector<T>& w, const Dims3& d, int x, int y, int z) {
    if (x < 0 || x >= d[0] || y < 0 || y >= d[1] || z < 0 || z >= d[2])
        return 0.0;
    return double(w[lindex(d, x, y, z)]);
}

} // namespace detail

// Rueckert bending energy: mean over interior voxels of
//   sum_c uxx^2 + uyy^2 + uzz^2 + 2(uxy^2 + uxz^2 + uyz^2)
// with central second differences in voxel units. Grids with no interior
// voxel have zero energy.
template <typename T>
double bending_fwd(ConstVecFieldView<T> u, const Dims3& d) {
    const int nx = d[0], ny = d[1], nz = d[2];
    if (nx < 3 || ny < 3 || nz < 3) return 0.0;
    std::vector<double> partial(nz, 0.0);
#pragma omp parallel for schedule(static)
    for (int z = 1; z < nz - 1; ++z) {
        double acc = 0.0;
        for (int y = 1; y < ny - 1; ++y)
            for (int x = 1; x < nx - 1; ++x)
                for (int c = 0; c < 3; ++c) {
                    auto at = [&](int xs, int ys, int zs) {
                        return double(u.get(lindex(d, xs, ys, zs), c));
                    };
                    const double uc = at(x, y, z);
                    const double uxx = at(x + 1, y, z) - 2.0 * uc + at(x - 1, y, z);
                    const double uyy = at(x, y + 1, z) - 2.0 * uc + at(x, y - 1, z);
                    const double uzz = at(x, y, z + 1) - 2.0 * uc + at(x, y, z - 1);
                    const double uxy = 0.25 * (at(x + 1, y + 1, z) - at(x + 1, y - 1, z) -
                                               at(x - 1, y + 1, z) + at(x - 1, y - 1, z));
                    const double uxz = 0.25 * (at(x + 1, y, z + 1) - at(x + 1, y, z - 1) -
                                               at(x - 1, y, z + 1) + at(x - 1, y, z - 1));
                    const double uyz = 0.25 * (at(x, y + 1, z + 1) - at(x, y + 1, z - 1) -
                                               at(x, y - 1, z + 1) + at(x, y - 1, z - 1));
                    acc += uxx * uxx + uyy * uyy + uzz * uzz +
                           2.0 * (uxy * uxy + uxz * uxz + uyz * uyz);
                }
        partial[z] = acc;
    }
    double sum = 0.0;
    for (int z = 0; z < nz; ++z) sum += partial[z];
    const double m = double(nx - 2) * double(ny - 2) * double(nz - 2);
    return sum / m;
}

// Accumulates gout * dE/du into gu. The central-difference stencils are
// symmetric under negation of all offsets, so each operator is its own
// adjoint once the interior derivative field is zero-extended.
template <typename T>
void bending_bwd(ConstVecFieldView<T> u, const Dims3& d, double gout,
                 VecFieldView<T> gu) {
    const int nx = d[0], ny = d[1], nz = d[2];
    if (nx < 3 || ny < 3 || nz < 3) return;
    const double m = double(nx - 2) * double(ny - 2) * double(nz - 2);
    const std::size_t n = voxel_count(d);
    std::vector<T> w(n);

    // ax/ay identify the derivative: pure when ax == ay, mixed otherwise.
    struct Stencil {
        int ax, ay;
        double scale;
    };
    const Stencil stencils[6] = {{0, 0, 2.0}, {1, 1, 2.0}, {2, 2, 2.0},
                                 {0, 1, 4.0}, {0, 2, 4.0}, {1, 2, 4.0}};

    for (int c = 0; c < 3; ++c) {
        for (const auto& st : stencils) {
            int ea[3] = {0, 0, 0}, eb[3] = {0, 0, 0};
            ea[st.ax] = 1;
            eb[st.ay] = 1;
#pragma omp parallel for collapse(2) schedule(static)
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x) {
                        const std::size_t i = lindex(d, x, y, z);
                        if (x < 1 || x >= nx - 1 || y < 1 || y >= ny - 1 ||
                            z < 1 || z >= nz - 1) {
                            w[i] = T(0);
                            continue;
                        }
                        auto at = [&](int dx, int dy, int dz) {
                            return double(u.get(lindex(d, x + dx, y + dy, z + dz), c));
                        };
                        double v;
                        if (st.ax == st.ay) {
                            v = at(ea[0], ea[1], ea[2]) - 2.0 * at(0, 0, 0) +
                                at(-ea[0], -ea[1], -ea[2]);
                        } else {
                            v = 0.25 * (at(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]) -
                                        at(ea[0] - eb[0], ea[1] - eb[1], ea[2] - eb[2]) -
                                        at(-ea[0] + eb[0], -ea[1] + eb[1], -ea[2] + eb[2]) +
                                        at(-ea[0] - eb[0], -ea[1] - eb[1], -ea[2] - eb[2]));
                        }
                        w[i] = T(v);
                    }
            const double k = gout * st.scale / m;
#pragma omp parallel for collapse(2) schedule(static)
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x) {
                        double v;
                        if (st.ax == st.ay) {
                            v = detail::rd0(w, d, x + ea[0], y + ea[1], z + ea[2]) -
                                2.0 * detail::rd0(w, d, x, y, z) +
                                detail::rd0(w, d, x - ea[0], y - ea[1], z - ea[2]);
                        } else {
                            v = 0.25 *
                                (detail::rd0(w, d, x + ea[0] + eb[0], y + ea[1] + eb[1],
                                             z + ea[2] + eb[2]) -
                                 detail::rd0(w, d, x + ea[0] - eb[0], y + ea[1] - eb[1],
                                             z + ea[2] - eb[2]) -
                                 detail::rd0(w, d, x - ea[0] + eb[0], y - ea[1] + eb[1],
                                             z - ea[2] + eb[2]) +
                                 detail::rd0(w, d, x - ea[0] - eb[0], y - ea[1] - eb[1],
                                             z - ea[2] - eb[2]));
                        }
                        gu.add(lindex(d, x, y, z), c, T(k * v));
                    }
        }
    }
}

namespace ref {

template <typename T>
double bending_fwd(ConstVecFieldView<T> u, const Dims3& d) {
    const int nx = d[0], ny = d[1], nz = d[2];
    if (nx < 3 || ny < 3 || nz < 3) return 0.0;
    double sum = 0.0;
    for (int z = 1; z < nz - 1; ++z)
        for (int y = 1; y < ny - 1; ++y)
            for (int x = 1; x < nx - 1; ++x)
                for (int c = 0; c < 3; ++c) {
                    auto at = [&](int xs, int ys, int zs) {
                        return double(u.get(lindex(d, xs, ys, zs), c));
                    };
                    const double uxx =
                        at(x + 1, y, z) - 2.0 * at(x, y, z) + at(x - 1, y, z);
                    const double uyy =
                        at(x, y + 1, z) - 2.0 * at(x, y, z) + at(x, y - 1, z);
                    const double uzz =
                        at(x, y, z + 1) - 2.0 * at(x, y, z) + at(x, y, z - 1);
                    const double uxy = 0.25 * (at(x + 1, y + 1, z) - at(x + 1, y - 1, z) -
                                               at(x - 1, y + 1, z) + at(x - 1, y - 1, z));
                    const double uxz = 0.25 * (at(x + 1, y, z + 1) - at(x + 1, y, z - 1) -
                                               at(x - 1, y, z + 1) + at(x - 1, y, z - 1));
                    const double uyz = 0.25 * (at(x, y + 1, z + 1) - at(x, y + 1, z - 1) -
                                               at(x, y - 1, z + 1) + at(x, y - 1, z - 1));
                    sum += uxx * uxx + uyy * uyy + uzz * uzz +
                           2.0 * (uxy * uxy + uxz * uxz + uyz * uyz);
                }
    return sum / (double(nx - 2) * double(ny - 2) * double(nz - 2));
}

} // namespace ref

} // namespace longreg::kern

#endif

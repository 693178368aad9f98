#ifndef LONGREG_KERN_INTERP_HPP
#define LONGREG_KERN_INTERP_HPP

#include <cmath>
#include <cstddef>

#include "longreg/kern/common.hpp"

namespace longreg::kern {

// Trilinear interpolation with zero fill outside [0, n-1] per axis.
// NaN coordinates fall into the early-out branch and yield 0.
template <typename T>
T trilinear(const T* v, const Dims3& d, T px, T py, T pz) {
    if (!(px > T(-1) && px < T(d[0]) && py > T(-1) && py < T(d[1]) &&
          pz > T(-1) && pz < T(d[2])))
        return T(0);
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const int z0 = static_cast<int>(std::floor(pz));
    const T fx = px - T(x0), fy = py - T(y0), fz = pz - T(z0);
    const T wx[2] = {T(1) - fx, fx};
    const T wy[2] = {T(1) - fy, fy};
    const T wz[2] = {T(1) - fz, fz};
    T acc = T(0);
    for (int cz = 0; cz < 2; ++cz) {
        const int z = z0 + cz;
        if (z < 0 || z >= d[2]) continue;
        for (int cy = 0; cy < 2; ++cy) {
            const int y = y0 + cy;
            if (y < 0 || y >= d[1]) continue;
            const T wzy = wz[cz] * wy[cy];
            for (int cx = 0; cx < 2; ++cx) {
                const int x = x0 + cx;
                if (x < 0 || x >= d[0]) continue;
                acc += wzy * wx[cx] * v[lindex(d, x, y, z)];
            }
        }
    }
    return acc;
}

// Value and gradient w.r.t. the sample position in one pass.
template <typename T>
T trilinear_vjp(const T* v, const Dims3& d, T px, T py, T pz, T grad[3]) {
    grad[0] = grad[1] = grad[2] = T(0);
    if (!(px > T(-1) && px < T(d[0]) && py > T(-1) && py < T(d[1]) &&
          pz > T(-1) && pz < T(d[2])))
        return T(0);
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const int z0 = static_cast<int>(std::floor(pz));
    const T fx = px - T(x0), fy = py - T(y0), fz = pz - T(z0);
    const T wx[2] = {T(1) - fx, fx};
    const T wy[2] = {T(1) - fy, fy};
    const T wz[2] = {T(1) - fz, fz};
    const T dw[2] = {T(-1), T(1)};
    T acc = T(0);
    for (int cz = 0; cz < 2; ++cz) {
        const int z = z0 + cz;
        if (z < 0 || z >= d[2]) continue;
        for (int cy = 0; cy < 2; ++cy) {
            const int y = y0 + cy;
            if (y < 0 || y >= d[1]) continue;
            for (int cx = 0; cx < 2; ++cx) {
                const int x = x0 + cx;
                if (x < 0 || x >= d[0]) continue;
                const T val = v[lindex(d, x, y, z)];
                acc += wz[cz] * wy[cy] * wx[cx] * val;
                grad[0] += wz[cz] * wy[cy] * dw[cx] * val;
                grad[1] += wz[cz] * dw[cy] * wx[cx] * val;
                grad[2] += dw[cz] * wy[cy] * wx[cx] * val;
            }
        }
    }
    return acc;
}

// out(x) = trilinear(vol, x + disp(x)), over the whole grid.
template <typename T>
void warp_fwd(const T* vol, const Dims3& d, ConstVecFieldView<T> disp, T* out) {
    const int nx = d[0], ny = d[1], nz = d[2];
#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            std::size_t i = lindex(d, 0, y, z);
            for (int x = 0; x < nx; ++x, ++i) {
                out[i] = trilinear(vol, d, T(x) + disp.get(i, 0),
                                   T(y) + disp.get(i, 1), T(z) + disp.get(i, 2));
            }
        }
    }
}

// Accumulates d(loss)/d(disp) given d(loss)/d(out). The moving volume is
// treated as constant.
template <typename T>
void warp_bwd_disp(const T* vol, const Dims3& d, ConstVecFieldView<T> disp,
                   const T* gout, VecFieldView<T> gdisp) {
    const int nx = d[0], ny = d[1], nz = d[2];
#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            std::size_t i = lindex(d, 0, y, z);
            for (int x = 0; x < nx; ++x, ++i) {
                T g[3];
                trilinear_vjp(vol, d, T(x) + disp.get(i, 0), T(y) + disp.get(i, 1),
                              T(z) + disp.get(i, 2), g);
                const T go = gout[i];
                gdisp.add(i, 0, go * g[0]);
                gdisp.add(i, 1, go * g[1]);
                gdisp.add(i, 2, go * g[2]);
            }
        }
    }
}

namespace ref {

// Naive serial reference used by tests and the kernel benchmark.
template <typename T>
void warp_fwd(const T* vol, const Dims3& d, ConstVecFieldView<T> disp, T* out) {
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x) {
                const std::size_t i = lindex(d, x, y, z);
                const T px = T(x) + disp.get(i, 0);
                const T py = T(y) + disp.get(i, 1);
                const T pz = T(z) + disp.get(i, 2);
                if (!(px > T(-1) && px < T(d[0]) && py > T(-1) && py < T(d[1]) &&
                      pz > T(-1) && pz < T(d[2]))) {
                    out[i] = T(0);
                    continue;
                }
                T acc = T(0);
                for (int cz = 0; cz < 2; ++cz)
                    for (int cy = 0; cy < 2; ++cy)
                        for (int cx = 0; cx < 2; ++cx) {
                            const int xs = static_cast<int>(std::floor(px)) + cx;
                            const int ys = static_cast<int>(std::floor(py)) + cy;
                            const int zs = static_cast<int>(std::floor(pz)) + cz;
                            if (xs < 0 || xs >= d[0] || ys < 0 || ys >= d[1] ||
                                zs < 0 || zs >= d[2])
                                continue;
                            const T wx = cx ? px - std::floor(px) : T(1) - (px - std::floor(px));
                            const T wy = cy ? py - std::floor(py) : T(1) - (py - std::floor(py));
                            const T wz = cz ? pz - std::floor(pz) : T(1) - (pz - std::floor(pz));
                            acc += wx * wy * wz * vol[lindex(d, xs, ys, zs)];
                        }
                out[i] = acc;
            }
}

} // namespace ref

} // namespace longreg::kern

#endif

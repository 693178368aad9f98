#ifndef LONGREG_KERN_BLUR_HPP
#define LONGREG_KERN_BLUR_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "longreg/kern/common.hpp"

namespace longreg::kern {

// Sampled isotropic Gaussian, truncated at 3 sigma, normalized to sum 1.
template <typename T>
std::vector<T> gauss_taps(double sigma) {
    if (sigma <= 0.0) return {T(1)};
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * r + 1);
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) {
        w[k + r] = std::exp(-0.5 * (double(k) * k) / (sigma * sigma));
        sum += w[k + r];
    }
    std::vector<T> taps(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) taps[j] = T(w[j] / sum);
    return taps;
}

namespace detail {

// One separable pass along `axis` with zero padding outside the grid.
template <typename T>
void blur_axis(const T* in, T* out, const Dims3& d, const std::vector<T>& taps,
               int axis) {
    const int r = static_cast<int>(taps.size() / 2);
    const int nx = d[0], ny = d[1], nz = d[2];
    const int n[3] = {nx, ny, nz};
    const std::ptrdiff_t step[3] = {1, nx, std::ptrdiff_t(nx) * ny};
#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const int pos[3] = {x, y, z};
                const std::size_t i = lindex(d, x, y, z);
                double acc = 0.0;
                const int c = pos[axis];
                const int klo = c - r < 0 ? -c : -r;
                const int khi = c + r >= n[axis] ? n[axis] - 1 - c : r;
                for (int k = klo; k <= khi; ++k)
                    acc += double(taps[k + r]) * double(in[i + k * step[axis]]);
                out[i] = T(acc);
            }
        }
    }
}

} // namespace detail

// Separable Gaussian smoothing, zero padding. sigma <= 0 copies the input.
// The same routine is its own adjoint (symmetric taps, zero padding), so the
// backward pass of a smoothed quantity is a smoothing of its gradient.
template <typename T>
void gauss_blur(const T* in, T* out, const Dims3& d, double sigma) {
    const std::size_t n = voxel_count(d);
    if (sigma <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i];
        return;
    }
    const auto taps = gauss_taps<T>(sigma);
    std::vector<T> tmp(n);
    detail::blur_axis(in, out, d, taps, 0);
    detail::blur_axis(out, tmp.data(), d, taps, 1);
    detail::blur_axis(tmp.data(), out, d, taps, 2);
}

namespace ref {

// Direct (non-separable) 3D convolution with the same truncated kernel.
template <typename T>
void gauss_blur(const T* in, T* out, const Dims3& d, double sigma) {
    const std::size_t n = voxel_count(d);
    if (sigma <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i];
        return;
    }
    const auto taps = gauss_taps<T>(sigma);
    const int r = static_cast<int>(taps.size() / 2);
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x) {
                double acc = 0.0;
                for (int kz = -r; kz <= r; ++kz)
                    for (int ky = -r; ky <= r; ++ky)
                        for (int kx = -r; kx <= r; ++kx) {
                            const int xs = x + kx, ys = y + ky, zs = z + kz;
                            if (xs < 0 || xs >= d[0] || ys < 0 || ys >= d[1] ||
                                zs < 0 || zs >= d[2])
                                continue;
                            acc += double(taps[kz + r]) * double(taps[ky + r]) *
                                   double(taps[kx + r]) *
                                   double(in[lindex(d, xs, ys, zs)]);
                        }
                out[lindex(d, x, y, z)] = T(acc);
            }
}

} // namespace ref

} // namespace longreg::kern

#endif

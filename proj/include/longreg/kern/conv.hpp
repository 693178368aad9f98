#ifndef LONGREG_KERN_CONV_HPP
#define LONGREG_KERN_CONV_HPP

#include <cstddef>

#include "longreg/kern/common.hpp"

namespace longreg::kern {

// Channel-planar tensor layout: index = ((c*nz + z)*ny + y)*nx + x.
// Weights: [cout][cin][kz][ky][kx], zero padding k/2, stride 1 or 2.

inline Dims3 conv_out_dims(const Dims3& din, int k, int stride) {
    const int p = k / 2;
    Dims3 o;
    for (int a = 0; a < 3; ++a) o[a] = (din[a] + 2 * p - k) / stride + 1;
    return o;
}

template <typename T>
void conv3_fwd(const T* in, int cin, const Dims3& din, const T* w, const T* b,
               int cout, int k, int stride, T* out, const Dims3& dout) {
    const int p = k / 2;
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < cout; ++co)
        for (int zo = 0; zo < dout[2]; ++zo)
            for (int yo = 0; yo < dout[1]; ++yo)
                for (int xo = 0; xo < dout[0]; ++xo) {
                    double acc = b ? double(b[co]) : 0.0;
                    for (int ci = 0; ci < cin; ++ci) {
                        const T* inp = in + std::size_t(ci) * ivol;
                        const T* wp =
                            w + ((std::size_t(co) * cin + ci) * k * k * k);
                        for (int kz = 0; kz < k; ++kz) {
                            const int zi = zo * stride + kz - p;
                            if (zi < 0 || zi >= din[2]) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int yi = yo * stride + ky - p;
                                if (yi < 0 || yi >= din[1]) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int xi = xo * stride + kx - p;
                                    if (xi < 0 || xi >= din[0]) continue;
                                    acc += double(wp[(kz * k + ky) * k + kx]) *
                                           double(inp[lindex(din, xi, yi, zi)]);
                                }
                            }
                        }
                    }
                    out[std::size_t(co) * ovol + lindex(dout, xo, yo, zo)] =
                        T(acc);
                }
}

template <typename T>
void conv3_bwd_input(const T* gout, const Dims3& dout, const T* w, int cin,
                     int cout, int k, int stride, T* gin, const Dims3& din) {
    const int p = k / 2;
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < cin; ++ci)
        for (int zi = 0; zi < din[2]; ++zi)
            for (int yi = 0; yi < din[1]; ++yi)
                for (int xi = 0; xi < din[0]; ++xi) {
                    double acc = 0.0;
                    for (int co = 0; co < cout; ++co) {
                        const T* gp = gout + std::size_t(co) * ovol;
                        const T* wp =
                            w + ((std::size_t(co) * cin + ci) * k * k * k);
                        for (int kz = 0; kz < k; ++kz) {
                            const int t = zi + p - kz;
                            if (t < 0 || t % stride) continue;
                            const int zo = t / stride;
                            if (zo >= dout[2]) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int u = yi + p - ky;
                                if (u < 0 || u % stride) continue;
                                const int yo = u / stride;
                                if (yo >= dout[1]) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int v = xi + p - kx;
                                    if (v < 0 || v % stride) continue;
                                    const int xo = v / stride;
                                    if (xo >= dout[0]) continue;
                                    acc += double(wp[(kz * k + ky) * k + kx]) *
                                           double(gp[lindex(dout, xo, yo, zo)]);
                                }
                            }
                        }
                    }
                    gin[std::size_t(ci) * ivol + lindex(din, xi, yi, zi)] +=
                        T(acc);
                }
}

template <typename T>
void conv3_bwd_weight(const T* gout, const Dims3& dout, const T* in, int cin,
                      const Dims3& din, int cout, int k, int stride, T* gw,
                      T* gb) {
    const int p = k / 2;
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        const T* gp = gout + std::size_t(co) * ovol;
        if (gb) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ovol; ++i) acc += double(gp[i]);
            gb[co] += T(acc);
        }
        for (int ci = 0; ci < cin; ++ci) {
            const T* inp = in + std::size_t(ci) * ivol;
            T* gwp = gw + ((std::size_t(co) * cin + ci) * k * k * k);
            for (int kz = 0; kz < k; ++kz)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        double acc = 0.0;
                        for (int zo = 0; zo < dout[2]; ++zo) {
                            const int zi = zo * stride + kz - p;
                            if (zi < 0 || zi >= din[2]) continue;
                            for (int yo = 0; yo < dout[1]; ++yo) {
                                const int yi = yo * stride + ky - p;
                                if (yi < 0 || yi >= din[1]) continue;
                                for (int xo = 0; xo < dout[0]; ++xo) {
                                    const int xi = xo * stride + kx - p;
                                    if (xi < 0 || xi >= din[0]) continue;
                                    acc += double(gp[lindex(dout, xo, yo, zo)]) *
                                           double(inp[lindex(din, xi, yi, zi)]);
                                }
                            }
                        }
                        gwp[(kz * k + ky) * k + kx] += T(acc);
                    }
        }
    }
}

// Nearest-neighbour 2x upsampling; input dims must be exactly half the output.
template <typename T>
void upsample2_fwd(const T* in, int c, const Dims3& din, T* out,
                   const Dims3& dout) {
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < dout[2]; ++z)
            for (int y = 0; y < dout[1]; ++y)
                for (int x = 0; x < dout[0]; ++x)
                    out[std::size_t(ch) * ovol + lindex(dout, x, y, z)] =
                        in[std::size_t(ch) * ivol +
                           lindex(din, x / 2, y / 2, z / 2)];
}

template <typename T>
void upsample2_bwd(const T* gout, int c, const Dims3& dout, T* gin,
                   const Dims3& din) {
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < din[2]; ++z)
            for (int y = 0; y < din[1]; ++y)
                for (int x = 0; x < din[0]; ++x) {
                    double acc = 0.0;
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx)
                                acc += double(
                                    gout[std::size_t(ch) * ovol +
                                         lindex(dout, 2 * x + dx, 2 * y + dy,
                                                2 * z + dz)]);
                    gin[std::size_t(ch) * ivol + lindex(din, x, y, z)] +=
                        T(acc);
                }
}

// Global average pool across the spatial grid, one scalar per channel.
template <typename T>
void gap_fwd(const T* in, int c, const Dims3& d, T* out) {
    const std::size_t vol = voxel_count(d);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const T* p = in + std::size_t(ch) * vol;
        for (std::size_t i = 0; i < vol; ++i) acc += double(p[i]);
        out[ch] = T(acc / double(vol));
    }
}

template <typename T>
void gap_bwd(const T* gout, int c, const Dims3& d, T* gin) {
    const std::size_t vol = voxel_count(d);
    for (int ch = 0; ch < c; ++ch) {
        const T g = T(double(gout[ch]) / double(vol));
        T* p = gin + std::size_t(ch) * vol;
        for (std::size_t i = 0; i < vol; ++i) p[i] += g;
    }
}

template <typename T>
void leaky_fwd(const T* in, std::size_t n, T slope, T* out) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i)
        out[i] = in[i] >= T(0) ? in[i] : slope * in[i];
}

template <typename T>
void leaky_bwd(const T* in, const T* gout, std::size_t n, T slope, T* gin) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i)
        gin[i] += in[i] >= T(0) ? gout[i] : slope * gout[i];
}

namespace ref {

template <typename T>
void conv3_fwd(const T* in, int cin, const Dims3& din, const T* w, const T* b,
               int cout, int k, int stride, T* out, const Dims3& dout) {
    const int p = k / 2;
    const std::size_t ivol = voxel_count(din);
    const std::size_t ovol = voxel_count(dout);
    for (int co = 0; co < cout; ++co)
        for (int zo = 0; zo < dout[2]; ++zo)
            for (int yo = 0; yo < dout[1]; ++yo)
                for (int xo = 0; xo < dout[0]; ++xo) {
                    double acc = b ? double(b[co]) : 0.0;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kz = 0; kz < k; ++kz)
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    const int zi = zo * stride + kz - p;
                                    const int yi = yo * stride + ky - p;
                                    const int xi = xo * stride + kx - p;
                                    if (zi < 0 || zi >= din[2] || yi < 0 ||
                                        yi >= din[1] || xi < 0 || xi >= din[0])
                                        continue;
                                    acc +=
                                        double(w[((std::size_t(co) * cin + ci) *
                                                      k * k * k +
                                                  (kz * k + ky) * k + kx)]) *
                                        double(in[std::size_t(ci) * ivol +
                                                  lindex(din, xi, yi, zi)]);
                                }
                    out[std::size_t(co) * ovol + lindex(dout, xo, yo, zo)] =
                        T(acc);
                }
}

} // namespace ref

} // namespace longreg::kern

#endif

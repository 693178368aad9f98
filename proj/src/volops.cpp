#include "longreg/volops.hpp"

#include <cmath>
#include <stdexcept>

#include "longreg/kern/interp.hpp"

namespace longreg {

float trilinear_sample(const Volume3D& vol, float px, float py, float pz) {
    if (!std::isfinite(px) || !std::isfinite(py) || !std::isfinite(pz))
        throw std::invalid_argument("trilinear_sample: non-finite coordinate");
    return kern::trilinear(vol.data.data(), vol.dims, px, py, pz);
}

Volume3D warp_volume(const Volume3D& vol, const DDF& ddf) {
    if (vol.dims != ddf.dims)
        throw std::invalid_argument("warp_volume: dimension mismatch");
    if (vol.spacing != ddf.spacing)
        throw std::invalid_argument("warp_volume: spacing mismatch");
    Volume3D out;
    out.dims = ddf.dims;
    out.spacing = ddf.spacing;
    out.data.resize(voxel_count(out.dims));
    kern::warp_fwd(vol.data.data(), vol.dims,
                   kern::ConstVecFieldView<float>::interleaved(ddf.disp.data()),
                   out.data.data());
    return out;
}

Volume3D resample_isotropic(const Volume3D& vol, float target) {
    if (!(target > 0.0f))
        throw std::invalid_argument("resample_isotropic: target must be > 0");
    Volume3D out;
    out.spacing = {target, target, target};
    for (int a = 0; a < 3; ++a) {
        const double n =
            std::floor(double(vol.dims[a]) * vol.spacing[a] / target + 0.5);
        out.dims[a] = n < 1.0 ? 1 : int(n);
    }
    out.data.resize(voxel_count(out.dims));
    const double sx = double(target) / vol.spacing[0];
    const double sy = double(target) / vol.spacing[1];
    const double sz = double(target) / vol.spacing[2];
#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < out.dims[2]; ++z)
        for (int y = 0; y < out.dims[1]; ++y)
            for (int x = 0; x < out.dims[0]; ++x)
                out.data[kern::lindex(out.dims, x, y, z)] =
                    kern::trilinear(vol.data.data(), vol.dims, float(x * sx),
                                    float(y * sy), float(z * sz));
    return out;
}

Volume3D center_crop(const Volume3D& vol, const Dims3& out_dims) {
    for (int a = 0; a < 3; ++a) {
        if (out_dims[a] < 1 || out_dims[a] > vol.dims[a])
            throw std::invalid_argument("center_crop: out_dims out of range");
    }
    Volume3D out;
    out.dims = out_dims;
    out.spacing = vol.spacing;
    out.data.resize(voxel_count(out_dims));
    const int ox = (vol.dims[0] - out_dims[0]) / 2;
    const int oy = (vol.dims[1] - out_dims[1]) / 2;
    const int oz = (vol.dims[2] - out_dims[2]) / 2;
    for (int z = 0; z < out_dims[2]; ++z)
        for (int y = 0; y < out_dims[1]; ++y)
            for (int x = 0; x < out_dims[0]; ++x)
                out.data[kern::lindex(out_dims, x, y, z)] =
                    vol.data[kern::lindex(vol.dims, x + ox, y + oy, z + oz)];
    return out;
}

Volume3D normalize_intensity(const Volume3D& vol) {
    if (vol.data.empty())
        throw std::invalid_argument("normalize_intensity: empty volume");
    float lo = vol.data[0], hi = vol.data[0];
    for (float v : vol.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Volume3D out = vol;
    if (hi == lo) {
        for (float& v : out.data) v = 0.0f;
        return out;
    }
    const float inv = 1.0f / (hi - lo);
    for (float& v : out.data) v = (v - lo) * inv;
    return out;
}

Vec3 centroid(const Volume3D& mask, float threshold) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    long count = 0;
    for (int z = 0; z < mask.dims[2]; ++z)
        for (int y = 0; y < mask.dims[1]; ++y)
            for (int x = 0; x < mask.dims[0]; ++x)
                if (mask.data[kern::lindex(mask.dims, x, y, z)] >= threshold) {
                    sx += x;
                    sy += y;
                    sz += z;
                    ++count;
                }
    if (count == 0)
        throw std::invalid_argument("centroid: mask empty after threshold");
    return {float(sx / count * mask.spacing[0]),
            float(sy / count * mask.spacing[1]),
            float(sz / count * mask.spacing[2])};
}

DDF affine_to_ddf(const Mat3& A, const Vec3& b, const Dims3& dims,
                  const Spacing3& spacing) {
    const double det =
        double(A[0][0]) * (double(A[1][1]) * A[2][2] - double(A[1][2]) * A[2][1]) -
        double(A[0][1]) * (double(A[1][0]) * A[2][2] - double(A[1][2]) * A[2][0]) +
        double(A[0][2]) * (double(A[1][0]) * A[2][1] - double(A[1][1]) * A[2][0]);
    if (det == 0.0)
        throw std::invalid_argument("affine_to_ddf: singular matrix");
    DDF out;
    out.dims = dims;
    out.spacing = spacing;
    out.disp.resize(3 * voxel_count(dims));
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const std::size_t i = kern::lindex(dims, x, y, z);
                const double p[3] = {double(x), double(y), double(z)};
                for (int c = 0; c < 3; ++c) {
                    const double t = double(A[c][0]) * p[0] +
                                     double(A[c][1]) * p[1] +
                                     double(A[c][2]) * p[2] + b[c];
                    out.disp[3 * i + c] = float(t - p[c]);
                }
            }
    return out;
}

} // namespace longreg

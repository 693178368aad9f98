#ifndef LONGREG_VOLOPS_HPP
#define LONGREG_VOLOPS_HPP

#include <array>

#include "longreg/volume.hpp"

namespace longreg {

using Mat3 = std::array<std::array<float, 3>, 3>;
using Vec3 = std::array<float, 3>;

// Trilinear interpolation at a continuous voxel coordinate; zero outside
// [0, n-1] per axis. Non-finite coordinates are rejected.
float trilinear_sample(const Volume3D& vol, float px, float py, float pz);

// out(x) = trilinear_sample(vol, x + disp(x)) over the DDF grid.
Volume3D warp_volume(const Volume3D& vol, const DDF& ddf);

// Resample to isotropic `target` mm/voxel; new dims = round(n*s/target).
Volume3D resample_isotropic(const Volume3D& vol, float target);

// Crop window centered with offset floor((n-m)/2) per axis.
Volume3D center_crop(const Volume3D& vol, const Dims3& out_dims);

// Min-max rescale to [0,1]; constant volumes map to all zeros.
Volume3D normalize_intensity(const Volume3D& vol);

// Mean voxel-center position of voxels >= threshold, in mm.
Vec3 centroid(const Volume3D& mask, float threshold = 0.5f);

// disp(x) = A*x + b - x on the given grid, in voxel units.
DDF affine_to_ddf(const Mat3& A, const Vec3& b, const Dims3& dims,
                  const Spacing3& spacing);

} // namespace longreg

#endif

#ifndef LONGREG_FFD_HPP
#define LONGREG_FFD_HPP

#include <array>
#include <vector>

#include "longreg/volume.hpp"

namespace longreg {

// Control lattice with a one-point margin on each side: control k sits at
// voxel position k*spacing, k = -1 .. floor((n-1)/spacing)+2, stored at
// array index k+1.
struct FFDGrid {
    Dims3 lattice = {0, 0, 0};
    int spacing = 5;
    std::vector<float> disp; // interleaved 3-vector per control point

    std::size_t points() const {
        return std::size_t(lattice[0]) * lattice[1] * lattice[2];
    }
};

FFDGrid make_ffd_grid(const Dims3& image_dims, int spacing);

// Cubic B-spline basis at local coordinate t in [0,1).
std::array<double, 4> bspline_weights(double t);

// Dense field via separable tensor-product interpolation of the control
// displacements.
DDF ffd_to_ddf(const FFDGrid& grid, const Dims3& image_dims,
               const Spacing3& spacing);

// Adjoint of ffd_to_ddf: accumulates dL/dcontrol from dL/ddense.
void ffd_ctrl_grad(const FFDGrid& grid, const Dims3& image_dims,
                   const std::vector<float>& gdense, std::vector<float>& gctrl);

struct FfdConfig {
    // A coarse lattice carries the boundary signal into contrast-free
    // interiors; finer spacings undershoot there.
    int cp_spacing = 8;
    double lr = 60.0;
    int iterations = 300;
    double gamma_be = 0.001;
};

struct FfdResult {
    DDF ddf;
    std::vector<double> trace; // per-iteration loss
};

// Fixed-step gradient descent on ssd(warp(moving), fixed) +
// gamma_be * bending_energy.
FfdResult ffd_register(const Volume3D& moving, const Volume3D& fixed,
                       const FfdConfig& cfg);

namespace ref {
DDF ffd_to_ddf(const FFDGrid& grid, const Dims3& image_dims,
               const Spacing3& spacing);
}

} // namespace longreg

#endif

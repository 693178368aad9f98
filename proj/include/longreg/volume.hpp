#ifndef LONGREG_VOLUME_HPP
#define LONGREG_VOLUME_HPP

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace longreg {

using Dims3 = std::array<int, 3>;    // (nx, ny, nz)
using Spacing3 = std::array<float, 3>; // mm per voxel

inline std::size_t voxel_count(const Dims3& d) {
    return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) *
           static_cast<std::size_t>(d[2]);
}

// Scalar intensity grid. Data is linear, x-fastest:
// index(x,y,z) = (z*ny + y)*nx + x.
struct Volume3D {
    Dims3 dims{0, 0, 0};
    Spacing3 spacing{1.f, 1.f, 1.f};
    std::vector<float> data;

    Volume3D() = default;
    Volume3D(Dims3 d, Spacing3 s, float fill = 0.f)
        : dims(d), spacing(s), data(voxel_count(d), fill) {
        validate();
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }

    bool same_grid(const Volume3D& o) const {
        return dims == o.dims && spacing == o.spacing;
    }

    void validate() const {
        if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
            throw std::invalid_argument("Volume3D: dims must all be >= 1");
        if (!(spacing[0] > 0.f && spacing[1] > 0.f && spacing[2] > 0.f))
            throw std::invalid_argument("Volume3D: spacing must all be > 0");
        if (data.size() != voxel_count(dims))
            throw std::invalid_argument("Volume3D: data length does not match dims");
    }
};

// Dense displacement field on the fixed-image grid, voxel units.
// Per-voxel 3-vectors stored interleaved: disp[3*index + c], c in {x,y,z}.
struct DDF {
    Dims3 dims{0, 0, 0};
    Spacing3 spacing{1.f, 1.f, 1.f};
    std::vector<float> disp;

    DDF() = default;
    DDF(Dims3 d, Spacing3 s) : dims(d), spacing(s), disp(3 * voxel_count(d), 0.f) {}

    std::size_t voxels() const { return voxel_count(dims); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    float component(int x, int y, int z, int c) const {
        return disp[3 * index(x, y, z) + c];
    }
    float& component(int x, int y, int z, int c) {
        return disp[3 * index(x, y, z) + c];
    }
};

// One binary mask per landmark; ids unique within a visit.
struct LandmarkSet {
    std::vector<std::pair<int, Volume3D>> marks;

    bool empty() const { return marks.empty(); }
    std::size_t size() const { return marks.size(); }
};

} // namespace longreg

#endif

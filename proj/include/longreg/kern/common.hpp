#ifndef LONGREG_KERN_COMMON_HPP
#define LONGREG_KERN_COMMON_HPP

#include <cstddef>

#include "longreg/volume.hpp"

namespace longreg::kern {

// View of a per-voxel 3-vector field. Component c of voxel i lives at
// comp[c][i*stride]: stride 3 for interleaved DDF storage, stride 1 for
// channel-planar tensors.
template <typename T>
struct VecFieldView {
    T* comp[3];
    std::size_t stride;

    T get(std::size_t i, int c) const { return comp[c][i * stride]; }
    void add(std::size_t i, int c, T v) const { comp[c][i * stride] += v; }

    static VecFieldView interleaved(T* p) { return {{p, p + 1, p + 2}, 3}; }
    static VecFieldView planar(T* p, std::size_t n) {
        return {{p, p + n, p + 2 * n}, 1};
    }
};

template <typename T>
struct ConstVecFieldView {
    const T* comp[3];
    std::size_t stride;

    T get(std::size_t i, int c) const { return comp[c][i * stride]; }

    static ConstVecFieldView interleaved(const T* p) {
        return {{p, p + 1, p + 2}, 3};
    }
    static ConstVecFieldView planar(const T* p, std::size_t n) {
        return {{p, p + n, p + 2 * n}, 1};
    }
};

inline std::size_t lindex(const Dims3& d, int x, int y, int z) {
    return (static_cast<std::size_t>(z) * d[1] + y) * d[0] + x;
}

} // namespace longreg::kern

#endif

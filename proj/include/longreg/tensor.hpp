#ifndef LONGREG_TENSOR_HPP
#define LONGREG_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "longreg/volume.hpp"

namespace longreg {

// Shape conventions: {c} vectors/biases, {1} scalars, {c,nz,ny,nx} field
// tensors, {cout,cin,k,k,k} convolution weights.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 1) throw std::invalid_argument("tensor dim < 1");
            n *= std::size_t(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    int rank() const { return int(shape.size()); }

    int channels() const { return shape.at(0); }

    // Spatial grid of a rank-4 {c,nz,ny,nx} tensor, in (nx,ny,nz) order.
    Dims3 grid() const {
        if (rank() != 4) throw std::invalid_argument("tensor is not rank 4");
        return {shape[3], shape[2], shape[1]};
    }

    std::size_t grid_voxels() const {
        const Dims3 d = grid();
        return voxel_count(d);
    }
};

using Tensor = TensorT<float>;

template <typename T>
TensorT<T> vol_tensor(const Volume3D& v) {
    TensorT<T> t({1, v.dims[2], v.dims[1], v.dims[0]});
    for (std::size_t i = 0; i < v.data.size(); ++i) t.data[i] = T(v.data[i]);
    return t;
}

} // namespace longreg

#endif

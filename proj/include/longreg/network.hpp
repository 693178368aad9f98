#ifndef LONGREG_NETWORK_HPP
#define LONGREG_NETWORK_HPP

#include <map>
#include <string>

#include "longreg/rng.hpp"
#include "longreg/tape.hpp"
#include "longreg/tensor.hpp"

namespace longreg {

struct Arch {
    int levels = 3;
    std::vector<int> channels = {8, 16, 32};
    int kernel = 3;
    float slope = 0.2f;

    void validate() const {
        if (levels < 1) throw std::invalid_argument("arch: levels < 1");
        if (int(channels.size()) != levels)
            throw std::invalid_argument("arch: channels/levels mismatch");
        for (int c : channels)
            if (c < 1) throw std::invalid_argument("arch: channel < 1");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("arch: kernel must be odd");
    }

    // Input grids must divide evenly through all strided levels.
    void check_grid(const Dims3& d) const {
        const int f = 1 << levels;
        for (int a = 0; a < 3; ++a)
            if (d[a] % f != 0)
                throw std::invalid_argument(
                    "arch: grid not divisible by 2^levels");
    }

    int bottleneck_channels() const { return channels.back(); }
};

template <typename T>
using ParamMapT = std::map<std::string, TensorT<T>>;

// Encoder: per level a strided convolution + nonlinearity + residual
// shortcut. Decoder mirrors with additive skips. Final head maps to 3
// channels and starts at zero so the initial transform is the identity.
template <typename T>
ParamMapT<T> init_params(const Arch& arch, Rng& rng) {
    arch.validate();
    ParamMapT<T> p;
    const int k = arch.kernel;
    auto conv_init = [&](const std::string& name, int cin, int cout,
                         bool zero) {
        TensorT<T> w({cout, cin, k, k, k});
        TensorT<T> b({cout});
        if (!zero) {
            const double std = std::sqrt(2.0 / (double(cin) * k * k * k));
            for (auto& v : w.data) v = T(rng.normal() * std);
        }
        p[name + "_w"] = std::move(w);
        p[name + "_b"] = std::move(b);
    };
    for (int l = 0; l < arch.levels; ++l) {
        const int cin = l == 0 ? 2 : arch.channels[l - 1];
        conv_init("down" + std::to_string(l + 1), cin, arch.channels[l], false);
        conv_init("res" + std::to_string(l + 1), arch.channels[l],
                  arch.channels[l], false);
    }
    for (int l = 0; l < arch.levels - 1; ++l)
        conv_init("dec" + std::to_string(l + 1), arch.channels[l + 1],
                  arch.channels[l], false);
    conv_init("head", arch.channels[0], 3, true);
    return p;
}

template <typename T>
std::map<std::string, int> bind_params(Tape<T>& tape, const ParamMapT<T>& p,
                                       bool requires_grad) {
    std::map<std::string, int> ids;
    for (const auto& [name, t] : p) ids[name] = tape.leaf(t, requires_grad);
    return ids;
}

struct ForwardNodes {
    int ddf;  // {3, nz, ny, nx}
    int feat; // {bottleneck channels}
};

template <typename T>
ForwardNodes regnet_forward(Tape<T>& tape, const Arch& arch,
                            const std::map<std::string, int>& p, int input) {
    arch.validate();
    if (tape.val(input).channels() != 2)
        throw std::invalid_argument("regnet: input must have 2 channels");
    arch.check_grid(tape.val(input).grid());
    const T slope = T(arch.slope);
    auto at = [&](const std::string& n) {
        const auto it = p.find(n);
        if (it == p.end())
            throw std::invalid_argument("regnet: missing parameter " + n);
        return it->second;
    };
    auto block = [&](int x, const std::string& n, int stride) {
        return tape.leaky(tape.conv(x, at(n + "_w"), at(n + "_b"), stride),
                          slope);
    };
    int x = input;
    std::vector<int> skip(arch.levels);
    for (int l = 0; l < arch.levels; ++l) {
        const std::string suffix = std::to_string(l + 1);
        x = block(x, "down" + suffix, 2);
        x = tape.add(x, block(x, "res" + suffix, 1));
        skip[l] = x;
    }
    const int feat = tape.gap(x);
    for (int l = arch.levels - 2; l >= 0; --l) {
        x = tape.upsample2(x);
        x = block(x, "dec" + std::to_string(l + 1), 1);
        x = tape.add(x, skip[l]);
    }
    x = tape.upsample2(x);
    const int ddf = tape.conv(x, at("head_w"), at("head_b"), 1);
    return {ddf, feat};
}

// Stack moving and fixed as the 2-channel network input.
template <typename T>
TensorT<T> stack_pair(const Volume3D& moving, const Volume3D& fixed) {
    if (moving.dims != fixed.dims)
        throw std::invalid_argument("stack_pair: dim mismatch");
    const Dims3 d = moving.dims;
    TensorT<T> t({2, d[2], d[1], d[0]});
    const std::size_t n = voxel_count(d);
    for (std::size_t i = 0; i < n; ++i) {
        t.data[i] = T(moving.data[i]);
        t.data[n + i] = T(fixed.data[i]);
    }
    return t;
}

} // namespace longreg

#endif

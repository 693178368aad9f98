#ifndef LONGREG_ADAM_HPP
#define LONGREG_ADAM_HPP

#include <cmath>
#include <stdexcept>

#include "longreg/network.hpp"

namespace longreg {

template <typename T>
struct AdamStateT {
    ParamMapT<T> m, v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-4;
};

using AdamState = AdamStateT<float>;

// Standard Adam with bias correction; moments are created lazily on the
// first step.
template <typename T>
void adam_step(ParamMapT<T>& params, const ParamMapT<T>& grads,
               AdamStateT<T>& st) {
    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (auto& [name, p] : params) {
        const auto git = grads.find(name);
        if (git == grads.end())
            throw std::invalid_argument("adam: missing gradient for " + name);
        const auto& g = git->second;
        if (g.shape != p.shape)
            throw std::invalid_argument("adam: shape mismatch for " + name);
        auto& m = st.m.try_emplace(name, TensorT<T>(p.shape)).first->second;
        auto& v = st.v.try_emplace(name, TensorT<T>(p.shape)).first->second;
        if (m.shape != p.shape || v.shape != p.shape)
            throw std::invalid_argument("adam: state shape mismatch for " + name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = double(g.data[i]);
            const double mi = st.beta1 * double(m.data[i]) + (1.0 - st.beta1) * gi;
            const double vi =
                st.beta2 * double(v.data[i]) + (1.0 - st.beta2) * gi * gi;
            m.data[i] = T(mi);
            v.data[i] = T(vi);
            p.data[i] -= T(st.lr * (mi / c1) / (std::sqrt(vi / c2) + st.eps));
        }
    }
}

} // namespace longreg

#endif

#ifndef LONGREG_TAPE_HPP
#define LONGREG_TAPE_HPP

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "longreg/kern/bending.hpp"
#include "longreg/kern/blur.hpp"
#include "longreg/kern/common.hpp"
#include "longreg/kern/conv.hpp"
#include "longreg/kern/interp.hpp"
#include "longreg/kern/lossmath.hpp"
#include "longreg/tensor.hpp"

namespace longreg {

// Reverse-mode tape over TensorT nodes. Ops append nodes; backward() walks
// them in reverse creation order, which is a valid topological order because
// every op consumes only earlier nodes. One tape per minibatch.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int leaf(TensorT<T> v, bool requires_grad = false) {
        return push(std::move(v), requires_grad, nullptr);
    }

    const TensorT<T>& val(int id) const { return nodes_.at(id).val; }
    TensorT<T>& grad(int id) { return nodes_.at(id).grad; }
    bool requires_grad(int id) const { return nodes_.at(id).rg; }

    double scalar(int id) const {
        const auto& v = nodes_.at(id).val;
        if (v.size() != 1) throw std::invalid_argument("node is not a scalar");
        return double(v.data[0]);
    }

    // y = conv(x, w) + b, zero padding k/2. b = -1 omits the bias.
    int conv(int x, int w, int b, int stride) {
        const auto& xv = nodes_.at(x).val;
        const auto& wv = nodes_.at(w).val;
        if (wv.rank() != 5 || xv.rank() != 4)
            throw std::invalid_argument("conv: bad ranks");
        const int cin = wv.shape[1], cout = wv.shape[0], k = wv.shape[2];
        if (xv.channels() != cin)
            throw std::invalid_argument("conv: channel mismatch");
        const Dims3 din = xv.grid();
        const Dims3 dout = kern::conv_out_dims(din, k, stride);
        TensorT<T> out({cout, dout[2], dout[1], dout[0]});
        const T* bias = b >= 0 ? nodes_.at(b).val.data.data() : nullptr;
        kern::conv3_fwd(xv.data.data(), cin, din, wv.data.data(), bias, cout, k,
                        stride, out.data.data(), dout);
        const bool rg =
            nodes_[x].rg || nodes_[w].rg || (b >= 0 && nodes_[b].rg);
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, x, w, b, cin, cout, k, stride, din,
                              dout] {
                const T* g = nodes_[id].grad.data.data();
                if (nodes_[x].rg)
                    kern::conv3_bwd_input(g, dout, nodes_[w].val.data.data(),
                                          cin, cout, k, stride,
                                          nodes_[x].grad.data.data(), din);
                if (nodes_[w].rg || (b >= 0 && nodes_[b].rg))
                    kern::conv3_bwd_weight(
                        g, dout, nodes_[x].val.data.data(), cin, din, cout, k,
                        stride, nodes_[w].grad.data.data(),
                        b >= 0 ? nodes_[b].grad.data.data() : nullptr);
            };
        return id;
    }

    int leaky(int x, T slope) {
        const auto& xv = nodes_.at(x).val;
        TensorT<T> out(xv.shape);
        kern::leaky_fwd(xv.data.data(), xv.size(), slope, out.data.data());
        const int id = push(std::move(out), nodes_[x].rg, nullptr);
        if (nodes_[x].rg)
            nodes_[id].bwd = [this, id, x, slope] {
                kern::leaky_bwd(nodes_[x].val.data.data(),
                                nodes_[id].grad.data.data(),
                                nodes_[x].val.size(), slope,
                                nodes_[x].grad.data.data());
            };
        return id;
    }

    int add(int a, int b) {
        const auto& av = nodes_.at(a).val;
        const auto& bv = nodes_.at(b).val;
        if (av.shape != bv.shape)
            throw std::invalid_argument("add: shape mismatch");
        TensorT<T> out(av.shape);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data[i] = av.data[i] + bv.data[i];
        const bool rg = nodes_[a].rg || nodes_[b].rg;
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, a, b] {
                const auto& g = nodes_[id].grad.data;
                if (nodes_[a].rg)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        nodes_[a].grad.data[i] += g[i];
                if (nodes_[b].rg)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        nodes_[b].grad.data[i] += g[i];
            };
        return id;
    }

    int upsample2(int x) {
        const auto& xv = nodes_.at(x).val;
        const Dims3 din = xv.grid();
        const Dims3 dout = {2 * din[0], 2 * din[1], 2 * din[2]};
        const int c = xv.channels();
        TensorT<T> out({c, dout[2], dout[1], dout[0]});
        kern::upsample2_fwd(xv.data.data(), c, din, out.data.data(), dout);
        const int id = push(std::move(out), nodes_[x].rg, nullptr);
        if (nodes_[x].rg)
            nodes_[id].bwd = [this, id, x, c, din, dout] {
                kern::upsample2_bwd(nodes_[id].grad.data.data(), c, dout,
                                    nodes_[x].grad.data.data(), din);
            };
        return id;
    }

    int gap(int x) {
        const auto& xv = nodes_.at(x).val;
        const Dims3 d = xv.grid();
        const int c = xv.channels();
        TensorT<T> out({c});
        kern::gap_fwd(xv.data.data(), c, d, out.data.data());
        const int id = push(std::move(out), nodes_[x].rg, nullptr);
        if (nodes_[x].rg)
            nodes_[id].bwd = [this, id, x, c, d] {
                kern::gap_bwd(nodes_[id].grad.data.data(), c, d,
                              nodes_[x].grad.data.data());
            };
        return id;
    }

    // out(x) = trilinear(vol, x + disp(x)). vol must be a constant leaf:
    // gradients flow into the displacement only (the moving image is data).
    int warp(int vol, int disp) {
        const auto& vv = nodes_.at(vol).val;
        const auto& dv = nodes_.at(disp).val;
        if (vv.channels() != 1 || dv.channels() != 3)
            throw std::invalid_argument("warp: need 1-channel vol, 3-channel disp");
        if (vv.grid() != dv.grid())
            throw std::invalid_argument("warp: grid mismatch");
        if (nodes_[vol].rg)
            throw std::invalid_argument("warp: vol gradients unsupported");
        const Dims3 d = vv.grid();
        const std::size_t n = voxel_count(d);
        TensorT<T> out({1, d[2], d[1], d[0]});
        kern::warp_fwd(vv.data.data(), d,
                       kern::ConstVecFieldView<T>::planar(dv.data.data(), n),
                       out.data.data());
        const int id = push(std::move(out), nodes_[disp].rg, nullptr);
        if (nodes_[disp].rg)
            nodes_[id].bwd = [this, id, vol, disp, d, n] {
                kern::warp_bwd_disp(
                    nodes_[vol].val.data.data(), d,
                    kern::ConstVecFieldView<T>::planar(
                        nodes_[disp].val.data.data(), n),
                    nodes_[id].grad.data.data(),
                    kern::VecFieldView<T>::planar(nodes_[disp].grad.data.data(),
                                                  n));
            };
        return id;
    }

    int ssd(int a, int b) {
        const auto& av = nodes_.at(a).val;
        const auto& bv = nodes_.at(b).val;
        if (av.shape != bv.shape)
            throw std::invalid_argument("ssd: shape mismatch");
        TensorT<T> out({1});
        out.data[0] = T(kern::ssd_fwd(av.data.data(), bv.data.data(), av.size()));
        const bool rg = nodes_[a].rg || nodes_[b].rg;
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, a, b] {
                const double g = double(nodes_[id].grad.data[0]);
                kern::ssd_bwd(
                    nodes_[a].val.data.data(), nodes_[b].val.data.data(),
                    nodes_[a].val.size(), g,
                    nodes_[a].rg ? nodes_[a].grad.data.data() : nullptr,
                    nodes_[b].rg ? nodes_[b].grad.data.data() : nullptr);
            };
        return id;
    }

    int msdice(int p, int q, std::vector<float> scales, double eps) {
        const auto& pv = nodes_.at(p).val;
        const auto& qv = nodes_.at(q).val;
        if (pv.shape != qv.shape)
            throw std::invalid_argument("msdice: shape mismatch");
        if (scales.empty()) throw std::invalid_argument("msdice: no scales");
        const Dims3 d = pv.grid();
        const std::size_t n = pv.size();
        std::vector<T> pb(n), qb(n);
        double acc = 0.0;
        for (float s : scales) {
            kern::gauss_blur(pv.data.data(), pb.data(), d, s);
            kern::gauss_blur(qv.data.data(), qb.data(), d, s);
            acc += kern::dice_from_sums(kern::dice_sums(pb.data(), qb.data(), n),
                                        eps);
        }
        TensorT<T> out({1});
        out.data[0] = T(acc / double(scales.size()));
        const bool rg = nodes_[p].rg || nodes_[q].rg;
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, p, q, scales, eps, d, n] {
                const double gout = double(nodes_[id].grad.data[0]) /
                                    double(scales.size());
                std::vector<T> pb(n), qb(n), gp(n), gq(n), sm(n);
                for (float s : scales) {
                    kern::gauss_blur(nodes_[p].val.data.data(), pb.data(), d, s);
                    kern::gauss_blur(nodes_[q].val.data.data(), qb.data(), d, s);
                    const auto sums = kern::dice_sums(pb.data(), qb.data(), n);
                    std::fill(gp.begin(), gp.end(), T(0));
                    std::fill(gq.begin(), gq.end(), T(0));
                    kern::dice_bwd_smoothed(
                        pb.data(), qb.data(), n, sums, eps, gout,
                        nodes_[p].rg ? gp.data() : nullptr,
                        nodes_[q].rg ? gq.data() : nullptr);
                    if (nodes_[p].rg) {
                        kern::gauss_blur(gp.data(), sm.data(), d, s);
                        for (std::size_t i = 0; i < n; ++i)
                            nodes_[p].grad.data[i] += sm[i];
                    }
                    if (nodes_[q].rg) {
                        kern::gauss_blur(gq.data(), sm.data(), d, s);
                        for (std::size_t i = 0; i < n; ++i)
                            nodes_[q].grad.data[i] += sm[i];
                    }
                }
            };
        return id;
    }

    int bending(int disp) {
        const auto& dv = nodes_.at(disp).val;
        if (dv.channels() != 3)
            throw std::invalid_argument("bending: need 3 channels");
        const Dims3 d = dv.grid();
        const std::size_t n = voxel_count(d);
        TensorT<T> out({1});
        out.data[0] = T(kern::bending_fwd(
            kern::ConstVecFieldView<T>::planar(dv.data.data(), n), d));
        const int id = push(std::move(out), nodes_[disp].rg, nullptr);
        if (nodes_[disp].rg)
            nodes_[id].bwd = [this, id, disp, d, n] {
                kern::bending_bwd(
                    kern::ConstVecFieldView<T>::planar(
                        nodes_[disp].val.data.data(), n),
                    d, double(nodes_[id].grad.data[0]),
                    kern::VecFieldView<T>::planar(nodes_[disp].grad.data.data(),
                                                  n));
            };
        return id;
    }

    // mmd_sq over two groups of same-length feature nodes.
    int mmd(std::vector<int> gi, std::vector<int> gj, double sigma) {
        if (gi.empty() || gj.empty())
            throw std::invalid_argument("mmd: empty group");
        const std::size_t len = nodes_.at(gi[0]).val.size();
        auto flat = [&](const std::vector<int>& ids) {
            std::vector<T> out;
            out.reserve(ids.size() * len);
            for (int id : ids) {
                const auto& v = nodes_.at(id).val;
                if (v.size() != len)
                    throw std::invalid_argument("mmd: length mismatch");
                out.insert(out.end(), v.data.begin(), v.data.end());
            }
            return out;
        };
        const auto u = flat(gi);
        const auto v = flat(gj);
        TensorT<T> out({1});
        out.data[0] =
            T(kern::mmd_fwd(u.data(), gi.size(), v.data(), gj.size(), len, sigma));
        bool rg = false;
        for (int id : gi) rg = rg || nodes_[id].rg;
        for (int id : gj) rg = rg || nodes_[id].rg;
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, gi, gj, sigma, len] {
                std::vector<T> u, v;
                u.reserve(gi.size() * len);
                v.reserve(gj.size() * len);
                for (int n : gi)
                    u.insert(u.end(), nodes_[n].val.data.begin(),
                             nodes_[n].val.data.end());
                for (int n : gj)
                    v.insert(v.end(), nodes_[n].val.data.begin(),
                             nodes_[n].val.data.end());
                std::vector<T> gu(u.size(), T(0)), gv(v.size(), T(0));
                kern::mmd_bwd(u.data(), gi.size(), v.data(), gj.size(), len,
                              sigma, double(nodes_[id].grad.data[0]), gu.data(),
                              gv.data());
                for (std::size_t a = 0; a < gi.size(); ++a)
                    if (nodes_[gi[a]].rg)
                        for (std::size_t c = 0; c < len; ++c)
                            nodes_[gi[a]].grad.data[c] += gu[a * len + c];
                for (std::size_t b = 0; b < gj.size(); ++b)
                    if (nodes_[gj[b]].rg)
                        for (std::size_t c = 0; c < len; ++c)
                            nodes_[gj[b]].grad.data[c] += gv[b * len + c];
            };
        return id;
    }

    // out = bias + sum_i coeff_i * scalar_i.
    int affine(std::vector<std::pair<double, int>> terms, double bias) {
        double acc = bias;
        bool rg = false;
        for (const auto& [c, id] : terms) {
            acc += c * scalar(id);
            rg = rg || nodes_[id].rg;
        }
        TensorT<T> out({1});
        out.data[0] = T(acc);
        const int id = push(std::move(out), rg, nullptr);
        if (rg)
            nodes_[id].bwd = [this, id, terms] {
                const double g = double(nodes_[id].grad.data[0]);
                for (const auto& [c, n] : terms)
                    if (nodes_[n].rg) nodes_[n].grad.data[0] += T(c * g);
            };
        return id;
    }

    void backward(int loss) {
        if (loss < 0 || loss >= int(nodes_.size()))
            throw std::invalid_argument("backward: no recorded graph");
        if (nodes_[loss].val.size() != 1)
            throw std::invalid_argument("backward: loss is not a scalar");
        for (auto& n : nodes_) n.grad = TensorT<T>(n.val.shape);
        nodes_[loss].grad.data[0] = T(1);
        for (int id = loss; id >= 0; --id)
            if (nodes_[id].bwd) nodes_[id].bwd();
    }

private:
    struct Node {
        TensorT<T> val;
        TensorT<T> grad;
        std::function<void()> bwd;
        bool rg = false;
    };

    int push(TensorT<T> v, bool rg, std::function<void()> bwd) {
        nodes_.push_back(Node{std::move(v), {}, std::move(bwd), rg});
        return int(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

} // namespace longreg

#endif

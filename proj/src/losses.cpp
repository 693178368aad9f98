#include "longreg/losses.hpp"

#include <algorithm>
#include <stdexcept>

#include "longreg/kern/bending.hpp"
#include "longreg/kern/blur.hpp"
#include "longreg/kern/common.hpp"
#include "longreg/kern/lossmath.hpp"

namespace longreg {

void LossWeights::validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 || lambda < 0)
        throw std::invalid_argument("LossWeights: negative weight");
    if (!(sigma > 0)) throw std::invalid_argument("LossWeights: sigma <= 0");
    if (!(eps > 0)) throw std::invalid_argument("LossWeights: eps <= 0");
    if (dice_scales.empty())
        throw std::invalid_argument("LossWeights: dice_scales empty");
    for (float s : dice_scales)
        if (s < 0) throw std::invalid_argument("LossWeights: negative scale");
}

namespace {

void require_same_dims(const Volume3D& a, const Volume3D& b, const char* op) {
    if (a.dims != b.dims)
        throw std::invalid_argument(std::string(op) + ": dim mismatch");
}

} // namespace

double ssd(const Volume3D& a, const Volume3D& b) {
    require_same_dims(a, b, "ssd");
    return kern::ssd_fwd(a.data.data(), b.data.data(), a.data.size());
}

Volume3D ssd_grad_a(const Volume3D& a, const Volume3D& b) {
    require_same_dims(a, b, "ssd");
    Volume3D g;
    g.dims = a.dims;
    g.spacing = a.spacing;
    g.data.assign(a.data.size(), 0.0f);
    kern::ssd_bwd(a.data.data(), b.data.data(), a.data.size(), 1.0,
                  g.data.data(), static_cast<float*>(nullptr));
    return g;
}

double multiscale_dice(const Volume3D& p, const Volume3D& q,
                       const LossWeights& w) {
    require_same_dims(p, q, "multiscale_dice");
    w.validate();
    const std::size_t n = p.data.size();
    std::vector<float> pb(n), qb(n);
    double acc = 0.0;
    for (float s : w.dice_scales) {
        kern::gauss_blur(p.data.data(), pb.data(), p.dims, s);
        kern::gauss_blur(q.data.data(), qb.data(), q.dims, s);
        acc += kern::dice_from_sums(kern::dice_sums(pb.data(), qb.data(), n),
                                    w.eps);
    }
    return acc / double(w.dice_scales.size());
}

Volume3D multiscale_dice_grad_p(const Volume3D& p, const Volume3D& q,
                                const LossWeights& w) {
    require_same_dims(p, q, "multiscale_dice");
    w.validate();
    const std::size_t n = p.data.size();
    Volume3D g;
    g.dims = p.dims;
    g.spacing = p.spacing;
    g.data.assign(n, 0.0f);
    std::vector<float> pb(n), qb(n), gpb(n), gsm(n);
    const double gout = 1.0 / double(w.dice_scales.size());
    for (float s : w.dice_scales) {
        kern::gauss_blur(p.data.data(), pb.data(), p.dims, s);
        kern::gauss_blur(q.data.data(), qb.data(), q.dims, s);
        const auto sums = kern::dice_sums(pb.data(), qb.data(), n);
        std::fill(gpb.begin(), gpb.end(), 0.0f);
        kern::dice_bwd_smoothed(pb.data(), qb.data(), n, sums, w.eps, gout,
                                gpb.data(), static_cast<float*>(nullptr));
        // The smoothing operator is self-adjoint, so the chain rule through
        // it is another smoothing of the same width.
        kern::gauss_blur(gpb.data(), gsm.data(), p.dims, s);
        for (std::size_t i = 0; i < n; ++i) g.data[i] += gsm[i];
    }
    return g;
}

double bending_energy(const DDF& ddf) {
    if (ddf.dims[0] < 3 || ddf.dims[1] < 3 || ddf.dims[2] < 3)
        throw std::invalid_argument("bending_energy: axis < 3 voxels");
    return kern::bending_fwd(
        kern::ConstVecFieldView<float>::interleaved(ddf.disp.data()), ddf.dims);
}

DDF bending_energy_grad(const DDF& ddf) {
    if (ddf.dims[0] < 3 || ddf.dims[1] < 3 || ddf.dims[2] < 3)
        throw std::invalid_argument("bending_energy: axis < 3 voxels");
    DDF g;
    g.dims = ddf.dims;
    g.spacing = ddf.spacing;
    g.disp.assign(ddf.disp.size(), 0.0f);
    kern::bending_bwd(
        kern::ConstVecFieldView<float>::interleaved(ddf.disp.data()), ddf.dims,
        1.0, kern::VecFieldView<float>::interleaved(g.disp.data()));
    return g;
}

double gaussian_kernel(const FeatureVec& u, const FeatureVec& v, double sigma) {
    if (u.v.size() != v.v.size())
        throw std::invalid_argument("gaussian_kernel: length mismatch");
    if (!(sigma > 0))
        throw std::invalid_argument("gaussian_kernel: sigma <= 0");
    return kern::gauss_k(u.v.data(), v.v.data(), u.v.size(), sigma);
}

std::vector<float> gaussian_kernel_grad_u(const FeatureVec& u,
                                          const FeatureVec& v, double sigma) {
    const double k = gaussian_kernel(u, v, sigma);
    std::vector<float> g(u.v.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = float(-k * (double(u.v[i]) - double(v.v[i])) / sigma);
    return g;
}

namespace {

std::vector<float> flatten(const std::vector<FeatureVec>& vs, const char* op,
                           std::size_t& len) {
    if (vs.empty()) throw std::invalid_argument(std::string(op) + ": empty set");
    len = vs[0].v.size();
    std::vector<float> flat;
    flat.reserve(vs.size() * len);
    for (const auto& f : vs) {
        if (f.v.size() != len)
            throw std::invalid_argument(std::string(op) + ": length mismatch");
        flat.insert(flat.end(), f.v.begin(), f.v.end());
    }
    return flat;
}

} // namespace

double mmd_sq(const std::vector<FeatureVec>& vi,
              const std::vector<FeatureVec>& vj, double sigma) {
    if (!(sigma > 0)) throw std::invalid_argument("mmd_sq: sigma <= 0");
    std::size_t li = 0, lj = 0;
    const auto u = flatten(vi, "mmd_sq", li);
    const auto v = flatten(vj, "mmd_sq", lj);
    if (li != lj) throw std::invalid_argument("mmd_sq: length mismatch");
    return kern::mmd_fwd(u.data(), vi.size(), v.data(), vj.size(), li, sigma);
}

void mmd_sq_grad(const std::vector<FeatureVec>& vi,
                 const std::vector<FeatureVec>& vj, double sigma,
                 std::vector<std::vector<float>>& gi,
                 std::vector<std::vector<float>>& gj) {
    if (!(sigma > 0)) throw std::invalid_argument("mmd_sq: sigma <= 0");
    std::size_t li = 0, lj = 0;
    const auto u = flatten(vi, "mmd_sq", li);
    const auto v = flatten(vj, "mmd_sq", lj);
    if (li != lj) throw std::invalid_argument("mmd_sq: length mismatch");
    std::vector<float> gu(u.size(), 0.0f), gv(v.size(), 0.0f);
    kern::mmd_bwd(u.data(), vi.size(), v.data(), vj.size(), li, sigma, 1.0,
                  gu.data(), gv.data());
    gi.assign(vi.size(), {});
    gj.assign(vj.size(), {});
    for (std::size_t i = 0; i < vi.size(); ++i)
        gi[i].assign(gu.begin() + i * li, gu.begin() + (i + 1) * li);
    for (std::size_t j = 0; j < vj.size(); ++j)
        gj[j].assign(gv.begin() + j * li, gv.begin() + (j + 1) * li);
}

double median_sigma(const std::vector<FeatureVec>& vecs) {
    std::vector<double> d2;
    for (std::size_t i = 0; i < vecs.size(); ++i)
        for (std::size_t j = i + 1; j < vecs.size(); ++j) {
            if (vecs[i].v.size() != vecs[j].v.size())
                throw std::invalid_argument("median_sigma: length mismatch");
            d2.push_back(kern::sqdist(vecs[i].v.data(), vecs[j].v.data(),
                                      vecs[i].v.size()));
        }
    if (d2.empty()) return 1.0;
    std::sort(d2.begin(), d2.end());
    const std::size_t n = d2.size();
    const double med = n % 2 ? d2[n / 2] : 0.5 * (d2[n / 2 - 1] + d2[n / 2]);
    return med > 0.0 ? med : 1.0;
}

} // namespace longreg

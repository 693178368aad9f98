#ifndef LONGREG_LOSSES_HPP
#define LONGREG_LOSSES_HPP

#include <vector>

#include "longreg/pairtype.hpp"
#include "longreg/volume.hpp"

namespace longreg {

struct LossWeights {
    float alpha = 1.0f;
    float beta = 1.0f;
    float gamma = 50.0f;
    float lambda = 0.01f;
    float sigma = 1.0f; // squared-distance scale of the Gaussian kernel
    std::vector<float> dice_scales = {0.0f, 1.0f, 2.0f, 4.0f};
    float eps = 1e-6f;

    void validate() const;
};

struct FeatureVec {
    std::vector<float> v;
    PairType tag = PairType::IF;
};

// Mean over voxels of (a-b)^2.
double ssd(const Volume3D& a, const Volume3D& b);
// d ssd / d a; d/d b is its negation.
Volume3D ssd_grad_a(const Volume3D& a, const Volume3D& b);

// Mean over dice_scales of soft Dice after Gaussian smoothing of both masks.
double multiscale_dice(const Volume3D& p, const Volume3D& q,
                       const LossWeights& w);
// d multiscale_dice / d p; swap arguments for d/d q.
Volume3D multiscale_dice_grad_p(const Volume3D& p, const Volume3D& q,
                                const LossWeights& w);

// Rueckert second-order penalty, mean over interior voxels, voxel units.
double bending_energy(const DDF& ddf);
DDF bending_energy_grad(const DDF& ddf);

double gaussian_kernel(const FeatureVec& u, const FeatureVec& v, double sigma);
std::vector<float> gaussian_kernel_grad_u(const FeatureVec& u,
                                          const FeatureVec& v, double sigma);

// Within-set sums skip the diagonal, so the estimate may be negative.
double mmd_sq(const std::vector<FeatureVec>& vi,
              const std::vector<FeatureVec>& vj, double sigma);
void mmd_sq_grad(const std::vector<FeatureVec>& vi,
                 const std::vector<FeatureVec>& vj, double sigma,
                 std::vector<std::vector<float>>& gi,
                 std::vector<std::vector<float>>& gj);

// Median of pairwise squared distances; 1.0 when degenerate.
double median_sigma(const std::vector<FeatureVec>& vecs);

} // namespace longreg

#endif

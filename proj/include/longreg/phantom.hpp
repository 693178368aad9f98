#ifndef LONGREG_PHANTOM_HPP
#define LONGREG_PHANTOM_HPP

#include <string>
#include <vector>

#include "longreg/cohort.hpp"
#include "longreg/rng.hpp"
#include "longreg/volume.hpp"

namespace longreg {

struct PhantomConfig {
    Dims3 dims = {32, 32, 32};
    Spacing3 spacing = {0.7f, 0.7f, 0.7f};
    int visits_min = 2;
    int visits_max = 4;
    double magnitude = 3.0;     // 99th-percentile displacement, voxels
    double smoothness = 4.0;    // Gaussian std of the deformation, voxels
    int landmarks = 2;          // blobs per patient
    double texture = 3.0;       // Gaussian std of the intensity texture
    std::uint64_t seed = 1;

    void validate() const;
};

// Smoothed white noise per component, rescaled so the 99th-percentile
// displacement magnitude equals `magnitude`.
DDF gen_smooth_ddf(const Dims3& dims, const Spacing3& spacing, double magnitude,
                   double smoothness, Rng& rng);

struct PhantomVisit {
    Volume3D image;
    Volume3D gland;
    LandmarkSet landmarks;
    // Pull-back field to the next visit: next(x) = this(x + gt_to_next(x)).
    // Present on every visit except the last.
    DDF gt_to_next;
    bool has_gt = false;
};

struct PhantomPatient {
    std::string id;
    std::vector<PhantomVisit> visits;
};

PhantomPatient gen_patient(const PhantomConfig& cfg, const std::string& id,
                           Rng& rng);

// Writes images/masks/landmarks as LVR1 plus manifest.txt and, when the
// split counts are nonzero, train.txt / val.txt / holdout.txt.
void write_cohort(const PhantomConfig& cfg, int patients,
                  const std::array<int, 3>& split_counts,
                  const std::string& out_dir);

} // namespace longreg

#endif

#ifndef LONGREG_COHORT_HPP
#define LONGREG_COHORT_HPP

#include <map>
#include <string>
#include <vector>

#include "longreg/pairtype.hpp"
#include "longreg/rng.hpp"
#include "longreg/volume.hpp"

namespace longreg {

struct Visit {
    double time_months = 0.0;
    std::string image_path;
    std::string mask_path;
    std::vector<std::string> landmark_paths;
};

struct Patient {
    std::string id;
    std::vector<Visit> visits; // strictly increasing acquisition times
};

struct LongitudinalDataset {
    std::vector<Patient> patients;

    void validate() const; // 2-4 visits per patient, increasing times
};

// Manifest: one visit per line,
//   patient_id,time_months,image_path,mask_path,lm1;lm2;...
// Blank lines and lines starting with '#' are skipped.
LongitudinalDataset load_manifest(const std::string& path,
                                  bool check_files = true);
void save_manifest(const std::string& path, const LongitudinalDataset& ds);

// Read-through cache of LVR1 volumes keyed by path.
class VolumeStore {
public:
    const Volume3D& get(const std::string& path);

private:
    std::map<std::string, Volume3D> cache_;
};

struct PairSample {
    Volume3D moving_image, moving_mask;
    Volume3D fixed_image, fixed_mask;
    PairType tag = PairType::IF;
    std::string moving_patient, fixed_patient;
    int moving_visit = 0, fixed_visit = 0;
};

enum class Strategy { IF, IF_IB, IT_IF_IB };

Strategy strategy_from_string(std::string_view s); // "if" | "if+ib" | "it+if+ib"
const char* to_string(Strategy s);

// Patient-level split, deterministic under seed; counts = (train, val,
// holdout) and may leave a remainder unassigned.
std::array<LongitudinalDataset, 3>
split_patients(const LongitudinalDataset& ds, const std::array<int, 3>& counts,
               std::uint64_t seed);

// IF: uniform patient, then uniform ordered visit pair (earlier moving).
// IB: the reversal. IT: two distinct patients, one uniform visit each.
PairSample sample_pair(const LongitudinalDataset& ds, VolumeStore& store,
                       PairType mode, Rng& rng);

// IF -> all IF; IF+IB -> batch/2 each; IT+IF+IB -> batch/2 intra (IF or IB
// with equal probability) + batch/2 IT.
std::vector<PairSample> compose_minibatch(const LongitudinalDataset& ds,
                                          VolumeStore& store,
                                          Strategy strategy, int batch,
                                          Rng& rng);

// Independent small random affine per image (rotation <= m*10 deg, scale in
// [1-0.1m, 1+0.1m], translation <= m*5 voxels); image and mask share the
// transform.
PairSample random_affine_augment(const PairSample& sample, double magnitude,
                                 Rng& rng);

} // namespace longreg

#endif

#ifndef LONGREG_EVALSTAT_HPP
#define LONGREG_EVALSTAT_HPP

#include <functional>
#include <string>
#include <vector>

#include "longreg/cohort.hpp"
#include "longreg/volume.hpp"

namespace longreg {

// 2|A and B| / (|A|+|B|) after thresholding; both empty -> 1.
double binary_dsc(const Volume3D& a, const Volume3D& b, float threshold = 0.5f);

double mse(const Volume3D& a, const Volume3D& b);

double centroid_distance(const Volume3D& a, const Volume3D& b,
                         float threshold = 0.5f);

struct TreResult {
    std::vector<double> mm;              // one entry per successful landmark
    std::vector<std::string> errors;     // per-landmark failure notes
};

// Warps each moving landmark mask by the DDF and reports the centroid
// distance to the corresponding fixed landmark, in mm. Landmarks are matched
// by id; a landmark that fails (empty after warping) is reported in
// `errors` while the rest proceed.
TreResult tre(const LandmarkSet& moving, const LandmarkSet& fixed,
              const DDF& ddf);

struct TTest {
    double t = 0.0;
    double p = 1.0;
};

// Two-sided paired t-test, df = n-1; identical inputs give t=0, p=1.
TTest paired_ttest(const std::vector<double>& x, const std::vector<double>& y);

enum class PairMode { IF, IF_IB };
PairMode pair_mode_from_string(std::string_view s); // "if" | "if+ib"

struct EvalCaseInput {
    std::string pair_id;
    Volume3D moving_image, moving_mask;
    Volume3D fixed_image, fixed_mask;
    LandmarkSet moving_landmarks, fixed_landmarks;
};

// Produces the DDF registering moving to fixed for one case. The identity
// baseline returns a zero field.
using Registrar = std::function<DDF(const EvalCaseInput&)>;

Registrar identity_registrar();

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0; // n-1 denominator; 0 when fewer than 2 samples
};

struct EvalSummary {
    int cases_ok = 0;
    int cases_failed = 0;
    MetricSummary dsc, cd, mse, tre;                 // registered
    MetricSummary pre_dsc, pre_cd, pre_mse, pre_tre; // without registration
};

// Evaluates every requested holdout pair, writes the report CSV
// (header pair_id,dsc,cd_mm,mse,tre_mm_mean,tre_mm_per_landmark,error; the
// summary rows are tagged __mean__/__sd__ and __prereg_mean__/__prereg_sd__)
// and returns the aggregate. Per-case failures are recorded and skipped.
EvalSummary evaluate_run(const LongitudinalDataset& holdout, VolumeStore& store,
                         PairMode mode, const Registrar& registrar,
                         const std::string& out_csv);

struct ReportRow {
    std::string pair_id;
    double dsc = 0, cd = 0, mse = 0, tre_mean = 0;
    bool has_tre = false;
};

// Per-case rows of a report CSV (summary and errored rows skipped).
std::vector<ReportRow> read_report(const std::string& path);

} // namespace longreg

#endif

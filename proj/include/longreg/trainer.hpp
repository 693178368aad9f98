#ifndef LONGREG_TRAINER_HPP
#define LONGREG_TRAINER_HPP

#include <map>
#include <string>
#include <vector>

#include "longreg/cohort.hpp"
#include "longreg/losses.hpp"
#include "longreg/netgrad.hpp"

namespace longreg {

struct TrainConfig {
    LossWeights weights;       // defaults 1, 1, 50, 0.01
    bool sigma_median = true;  // median heuristic per batch; else weights.sigma
    Strategy strategy = Strategy::IF;
    int batch = 4;
    long iterations = 2000;
    double lr = 1e-4;          // full runs: 1e-5 over 272k iterations
    std::uint64_t seed = 1;
    long val_every = 200;
    long ckpt_every = 500;
    bool use_mmd = false;
    double augment = 0.0;
    Arch arch;

    void validate() const;
};

std::map<std::string, std::string> parse_kv(const std::string& path);
TrainConfig parse_train_config(const std::string& path);

struct EqTerms {
    double dice = 0, ssd = 0, be = 0;
};

// Raw per-pair terms of the composite loss from already-warped outputs.
EqTerms pair_terms(const Volume3D& warped_image, const Volume3D& warped_mask,
                   const DDF& ddf, const Volume3D& fixed_image,
                   const Volume3D& fixed_mask, const LossWeights& w);

// (1/N) sum of -alpha*dice + beta*ssd + gamma*be.
double loss_eq1(const std::vector<EqTerms>& terms, const LossWeights& w);

// J* = J + lambda * mmd.
double loss_eq3(double j, double mmd_value, const LossWeights& w);

struct IterLog {
    long iteration = 0;
    double j = 0, dice = 0, ssd = 0, be = 0, mmd = 0;
};

struct TrainResult {
    std::string last_ckpt, best_ckpt, log_csv, val_csv;
    double best_val_dsc = -1.0;
    std::vector<IterLog> log;
};

TrainResult train(const LongitudinalDataset& train_ds,
                  const LongitudinalDataset& val_ds, const TrainConfig& cfg,
                  const std::string& out_dir);

struct RegOut {
    DDF ddf;
    Volume3D warped_image, warped_mask;
};

// Inference: one forward pass plus warps; never reads a fixed mask.
RegOut register_pair(const RegNetParams& params, const Volume3D& moving_image,
                     const Volume3D& moving_mask, const Volume3D& fixed_image);

// Mean holdout/validation metrics of the current parameters over the IF
// pairs of a dataset.
double validation_dsc(const RegNetParams& params,
                      const LongitudinalDataset& ds, VolumeStore& store);

} // namespace longreg

#endif

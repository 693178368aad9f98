#ifndef LONGREG_NETGRAD_HPP
#define LONGREG_NETGRAD_HPP

#include <string>
#include <utility>

#include "longreg/adam.hpp"
#include "longreg/losses.hpp"
#include "longreg/network.hpp"

namespace longreg {

struct RegNetParams {
    Arch arch;
    ParamMapT<float> tensors;
};

RegNetParams init_regnet(const Arch& arch, std::uint64_t seed);

/// Single inference pass: DDF on the fixed grid plus the encoder feature
// vector (global average of the bottleneck activations).
std::pair<DDF, FeatureVec> regnet_apply(const RegNetParams& params,
                                        const Volume3D& moving,
                                        const Volume3D& fixed);

// "LRCK" checkpoint: exact roundtrip of the architecture descriptor and all
// named parameter tensors.
void save_checkpoint(const std::string& path, const RegNetParams& params);
RegNetParams load_checkpoint(const std::string& path);

} // namespace longreg

#endif

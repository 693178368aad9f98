#ifndef LONGREG_LVR_IO_HPP
#define LONGREG_LVR_IO_HPP

#include <string>
#include <variant>

#include "longreg/volume.hpp"

namespace longreg {

// LVR1 container: magic "LVR1", u32 channel count (1 = volume, 3 = DDF),
// 3x u32 dims (nx,ny,nz), 3x f32 spacing, then float32 little-endian payload,
// x-fastest; 3-channel payloads are interleaved per voxel (dx,dy,dz).

void write_volume(const std::string& path, const Volume3D& vol);
void write_ddf(const std::string& path, const DDF& ddf);

using LvrObject = std::variant<Volume3D, DDF>;

LvrObject read_lvr(const std::string& path);
Volume3D read_volume(const std::string& path);
DDF read_ddf(const std::string& path);

// Header-only peek used for cheap manifest validation.
struct LvrHeader {
    uint32_t channels;
    Dims3 dims;
    Spacing3 spacing;
};
LvrHeader read_lvr_header(const std::string& path);

} // namespace longreg

#endif

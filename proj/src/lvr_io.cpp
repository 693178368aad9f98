#include "longreg/lvr_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace longreg {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'R', '1'};

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

bool get_f32(std::istream& is, float& f) {
    uint32_t v;
    if (!get_u32(is, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

void write_lvr(const std::string& path, uint32_t channels, const Dims3& dims,
               const Spacing3& spacing, const std::vector<float>& payload) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("LVR1: cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, channels);
    for (int a = 0; a < 3; ++a) put_u32(os, static_cast<uint32_t>(dims[a]));
    for (int a = 0; a < 3; ++a) put_f32(os, spacing[a]);
    for (float f : payload) put_f32(os, f);
    if (!os) throw std::runtime_error("LVR1: write failed: " + path);
}

} // namespace

void write_volume(const std::string& path, const Volume3D& vol) {
    vol.validate();
    write_lvr(path, 1, vol.dims, vol.spacing, vol.data);
}

void write_ddf(const std::string& path, const DDF& ddf) {
    if (ddf.disp.size() != 3 * voxel_count(ddf.dims))
        throw std::invalid_argument("LVR1: DDF payload does not match dims");
    write_lvr(path, 3, ddf.dims, ddf.spacing, ddf.disp);
}

LvrHeader read_lvr_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("LVR1: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("LVR1: bad magic in " + path);
    LvrHeader h{};
    uint32_t d[3];
    if (!get_u32(is, h.channels) || !get_u32(is, d[0]) || !get_u32(is, d[1]) ||
        !get_u32(is, d[2]))
        throw std::runtime_error("LVR1: truncated header in " + path);
    for (int a = 0; a < 3; ++a) h.dims[a] = static_cast<int>(d[a]);
    for (int a = 0; a < 3; ++a)
        if (!get_f32(is, h.spacing[a]))
            throw std::runtime_error("LVR1: truncated header in " + path);
    if (h.channels != 1 && h.channels != 3)
        throw std::runtime_error("LVR1: unsupported channel count " +
                                 std::to_string(h.channels) + " in " + path);
    return h;
}

LvrObject read_lvr(const std::string& path) {
    const LvrHeader h = read_lvr_header(path);
    std::ifstream is(path, std::ios::binary);
    is.seekg(4 + 4 * 4 + 3 * 4);
    const std::size_t n = voxel_count(h.dims) * h.channels;
    std::vector<float> payload(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!get_f32(is, payload[i]))
            throw std::runtime_error("LVR1: truncated payload in " + path);
    if (h.channels == 1) {
        Volume3D vol;
        vol.dims = h.dims;
        vol.spacing = h.spacing;
        vol.data = std::move(payload);
        vol.validate();
        return vol;
    }
    DDF ddf;
    ddf.dims = h.dims;
    ddf.spacing = h.spacing;
    ddf.disp = std::move(payload);
    return ddf;
}

Volume3D read_volume(const std::string& path) {
    auto obj = read_lvr(path);
    if (!std::holds_alternative<Volume3D>(obj))
        throw std::runtime_error("LVR1: expected 1-channel volume in " + path);
    return std::get<Volume3D>(std::move(obj));
}

DDF read_ddf(const std::string& path) {
    auto obj = read_lvr(path);
    if (!std::holds_alternative<DDF>(obj))
        throw std::runtime_error("LVR1: expected 3-channel DDF in " + path);
    return std::get<DDF>(std::move(obj));
}

} // namespace longreg

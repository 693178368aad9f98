#include "longreg/netgrad.hpp"

#include <cstring>
#include <fstream>

namespace longreg {

RegNetParams init_regnet(const Arch& arch, std::uint64_t seed) {
    Rng rng(seed, 0);
    return {arch, init_params<float>(arch, rng)};
}

std::pair<DDF, FeatureVec> regnet_apply(const RegNetParams& params,
                                        const Volume3D& moving,
                                        const Volume3D& fixed) {
    if (moving.dims != fixed.dims)
        throw std::invalid_argument("regnet_apply: dim mismatch");
    Tape<float> tape;
    const auto ids = bind_params(tape, params.tensors, false);
    const int input = tape.leaf(stack_pair<float>(moving, fixed), false);
    const auto out = regnet_forward(tape, params.arch, ids, input);

    const auto& dv = tape.val(out.ddf);
    DDF ddf;
    ddf.dims = fixed.dims;
    ddf.spacing = fixed.spacing;
    const std::size_t n = voxel_count(ddf.dims);
    ddf.disp.resize(3 * n);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i)
            ddf.disp[3 * i + c] = dv.data[c * n + i];

    FeatureVec feat;
    feat.v = tape.val(out.feat).data;
    return {std::move(ddf), std::move(feat)};
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32_array(std::ostream& os, const float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u;
        std::memcpy(&u, &p[i], 4);
        put_u32(os, u);
    }
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("truncated checkpoint in " + path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

float get_f32(std::istream& is, const std::string& path) {
    const std::uint32_t u = get_u32(is, path);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

void write_entry(std::ostream& os, const std::string& name,
                 const Tensor& t) {
    put_u32(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put_u32(os, std::uint32_t(t.shape.size()));
    for (int d : t.shape) put_u32(os, std::uint32_t(d));
    put_f32_array(os, t.data.data(), t.size());
}

Tensor arch_tensor(const Arch& arch) {
    Tensor t({3 + arch.levels});
    t.data[0] = float(arch.levels);
    t.data[1] = float(arch.kernel);
    t.data[2] = arch.slope;
    for (int l = 0; l < arch.levels; ++l)
        t.data[3 + l] = float(arch.channels[l]);
    return t;
}

Arch arch_from_tensor(const Tensor& t, const std::string& path) {
    if (t.rank() != 1 || t.size() < 4)
        throw std::runtime_error("bad architecture entry in " + path);
    Arch a;
    a.levels = int(t.data[0]);
    a.kernel = int(t.data[1]);
    a.slope = t.data[2];
    if (t.size() != std::size_t(3 + a.levels))
        throw std::runtime_error("bad architecture entry in " + path);
    a.channels.assign(a.levels, 0);
    for (int l = 0; l < a.levels; ++l) a.channels[l] = int(t.data[3 + l]);
    a.validate();
    return a;
}

} // namespace

void save_checkpoint(const std::string& path, const RegNetParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.write("LRCK", 4);
    put_u32(os, std::uint32_t(params.tensors.size() + 1));
    write_entry(os, "__arch__", arch_tensor(params.arch));
    for (const auto& [name, t] : params.tensors) write_entry(os, name, t);
    if (!os) throw std::runtime_error("write failed for " + path);
}

RegNetParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LRCK", 4) != 0)
        throw std::runtime_error("bad magic in " + path);
    const std::uint32_t count = get_u32(is, path);
    ParamMapT<float> tensors;
    Tensor arch_entry;
    bool have_arch = false;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint32_t nlen = get_u32(is, path);
        std::string name(nlen, '\0');
        is.read(name.data(), std::streamsize(nlen));
        if (!is) throw std::runtime_error("truncated checkpoint in " + path);
        const std::uint32_t rank = get_u32(is, path);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = int(get_u32(is, path));
        Tensor t(shape);
        for (auto& v : t.data) v = get_f32(is, path);
        if (name == "__arch__") {
            arch_entry = std::move(t);
            have_arch = true;
        } else {
            tensors[name] = std::move(t);
        }
    }
    if (!have_arch)
        throw std::runtime_error("missing architecture entry in " + path);
    RegNetParams params{arch_from_tensor(arch_entry, path), std::move(tensors)};

    Rng rng(0, 0);
    const auto expect = init_params<float>(params.arch, rng);
    if (expect.size() != params.tensors.size())
        throw std::runtime_error("checkpoint/architecture mismatch in " + path);
    for (const auto& [name, t] : expect) {
        const auto it = params.tensors.find(name);
        if (it == params.tensors.end() || it->second.shape != t.shape)
            throw std::runtime_error("checkpoint/architecture mismatch in " +
                                     path);
    }
    return params;
}

} // namespace longreg

#include "longreg/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "longreg/lvr_io.hpp"
#include "longreg/volops.hpp"

namespace longreg {

void LongitudinalDataset::validate() const {
    for (const auto& p : patients) {
        if (p.visits.size() < 2 || p.visits.size() > 4)
            throw std::invalid_argument("patient " + p.id +
                                        ": needs 2-4 visits");
        for (std::size_t i = 1; i < p.visits.size(); ++i)
            if (!(p.visits[i].time_months > p.visits[i - 1].time_months))
                throw std::invalid_argument("patient " + p.id +
                                            ": times not increasing");
    }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

LongitudinalDataset load_manifest(const std::string& path, bool check_files) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest " + path);
    LongitudinalDataset ds;
    std::map<std::string, std::size_t> index;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 5 comma-separated fields");
        Visit v;
        try {
            v.time_months = std::stod(fields[1]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": bad time value");
        }
        v.image_path = fields[2];
        v.mask_path = fields[3];
        if (!fields[4].empty())
            for (auto& lm : split(fields[4], ';'))
                if (!lm.empty()) v.landmark_paths.push_back(lm);
        if (check_files) {
            auto require = [&](const std::string& f) {
                if (!std::filesystem::exists(f))
                    throw std::runtime_error("manifest references missing file " +
                                             f);
            };
            require(v.image_path);
            require(v.mask_path);
            for (const auto& lm : v.landmark_paths) require(lm);
        }
        const auto [it, fresh] = index.try_emplace(fields[0], ds.patients.size());
        if (fresh) ds.patients.push_back(Patient{fields[0], {}});
        ds.patients[it->second].visits.push_back(std::move(v));
    }
    ds.validate();
    return ds;
}

void save_manifest(const std::string& path, const LongitudinalDataset& ds) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (const auto& p : ds.patients)
        for (const auto& v : p.visits) {
            os << p.id << ',' << v.time_months << ',' << v.image_path << ','
               << v.mask_path << ',';
            for (std::size_t i = 0; i < v.landmark_paths.size(); ++i)
                os << (i ? ";" : "") << v.landmark_paths[i];
            os << '\n';
        }
    if (!os) throw std::runtime_error("write failed for " + path);
}

const Volume3D& VolumeStore::get(const std::string& path) {
    const auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(path, read_volume(path)).first->second;
}

Strategy strategy_from_string(std::string_view s) {
    if (s == "if") return Strategy::IF;
    if (s == "if+ib") return Strategy::IF_IB;
    if (s == "it+if+ib") return Strategy::IT_IF_IB;
    throw std::invalid_argument("unknown strategy: " + std::string(s));
}

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::IF: return "if";
    case Strategy::IF_IB: return "if+ib";
    case Strategy::IT_IF_IB: return "it+if+ib";
    }
    return "?";
}

std::array<LongitudinalDataset, 3>
split_patients(const LongitudinalDataset& ds, const std::array<int, 3>& counts,
               std::uint64_t seed) {
    const int total = counts[0] + counts[1] + counts[2];
    if (counts[0] < 0 || counts[1] < 0 || counts[2] < 0 ||
        total > int(ds.patients.size()))
        throw std::invalid_argument("split_patients: counts exceed population");
    std::vector<std::size_t> order(ds.patients.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed, 7);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    std::array<LongitudinalDataset, 3> out;
    std::size_t pos = 0;
    for (int part = 0; part < 3; ++part)
        for (int k = 0; k < counts[part]; ++k)
            out[part].patients.push_back(ds.patients[order[pos++]]);
    return out;
}

namespace {

struct VisitRef {
    std::size_t patient;
    int moving, fixed;
};

VisitRef draw_intra(const LongitudinalDataset& ds, bool forward, Rng& rng) {
    if (ds.patients.empty())
        throw std::invalid_argument("sample_pair: empty dataset");
    const std::size_t p = rng.uniform_int(ds.patients.size());
    const int nv = int(ds.patients[p].visits.size());
    if (nv < 2)
        throw std::invalid_argument("sample_pair: patient lacks 2 visits");
    // Uniform over ordered pairs i<j.
    const int npairs = nv * (nv - 1) / 2;
    int k = int(rng.uniform_int(std::size_t(npairs)));
    int i = 0;
    while (k >= nv - 1 - i) {
        k -= nv - 1 - i;
        ++i;
    }
    const int j = i + 1 + k;
    return forward ? VisitRef{p, i, j} : VisitRef{p, j, i};
}

PairSample load_pair(const LongitudinalDataset& ds, VolumeStore& store,
                     std::size_t pm, int vm, std::size_t pf, int vf,
                     PairType tag) {
    const Visit& m = ds.patients[pm].visits[std::size_t(vm)];
    const Visit& f = ds.patients[pf].visits[std::size_t(vf)];
    PairSample s;
    s.moving_image = store.get(m.image_path);
    s.moving_mask = store.get(m.mask_path);
    s.fixed_image = store.get(f.image_path);
    s.fixed_mask = store.get(f.mask_path);
    s.tag = tag;
    s.moving_patient = ds.patients[pm].id;
    s.fixed_patient = ds.patients[pf].id;
    s.moving_visit = vm;
    s.fixed_visit = vf;
    return s;
}

} // namespace

PairSample sample_pair(const LongitudinalDataset& ds, VolumeStore& store,
                       PairType mode, Rng& rng) {
    if (mode == PairType::IT) {
        if (ds.patients.size() < 2)
            throw std::invalid_argument("sample_pair: IT needs 2 patients");
        const std::size_t pa = rng.uniform_int(ds.patients.size());
        std::size_t pb = rng.uniform_int(ds.patients.size() - 1);
        if (pb >= pa) ++pb;
        const int va = int(rng.uniform_int(ds.patients[pa].visits.size()));
        const int vb = int(rng.uniform_int(ds.patients[pb].visits.size()));
        return load_pair(ds, store, pa, va, pb, vb, PairType::IT);
    }
    const auto ref = draw_intra(ds, mode == PairType::IF, rng);
    return load_pair(ds, store, ref.patient, ref.moving, ref.patient, ref.fixed,
                     mode);
}

std::vector<PairSample> compose_minibatch(const LongitudinalDataset& ds,
                                          VolumeStore& store,
                                          Strategy strategy, int batch,
                                          Rng& rng) {
    if (batch < 1) throw std::invalid_argument("compose_minibatch: batch < 1");
    if (strategy != Strategy::IF && batch % 2 != 0)
        throw std::invalid_argument(
            "compose_minibatch: mixed strategies need an even batch");
    std::vector<PairSample> out;
    out.reserve(std::size_t(batch));
    switch (strategy) {
    case Strategy::IF:
        for (int i = 0; i < batch; ++i)
            out.push_back(sample_pair(ds, store, PairType::IF, rng));
        break;
    case Strategy::IF_IB:
        for (int i = 0; i < batch / 2; ++i)
            out.push_back(sample_pair(ds, store, PairType::IF, rng));
        for (int i = 0; i < batch / 2; ++i)
            out.push_back(sample_pair(ds, store, PairType::IB, rng));
        break;
    case Strategy::IT_IF_IB:
        for (int i = 0; i < batch / 2; ++i) {
            const PairType t =
                rng.uniform() < 0.5 ? PairType::IF : PairType::IB;
            out.push_back(sample_pair(ds, store, t, rng));
        }
        for (int i = 0; i < batch / 2; ++i)
            out.push_back(sample_pair(ds, store, PairType::IT, rng));
        break;
    }
    return out;
}

namespace {

// Rotation (XYZ Euler) * isotropic scale about the volume center, plus a
// translation, expressed as A, b over voxel coordinates.
void draw_affine(const Dims3& dims, double magnitude, Rng& rng, Mat3& A,
                 Vec3& b) {
    const double deg = std::numbers::pi / 180.0;
    const double rx = rng.uniform(-1.0, 1.0) * magnitude * 10.0 * deg;
    const double ry = rng.uniform(-1.0, 1.0) * magnitude * 10.0 * deg;
    const double rz = rng.uniform(-1.0, 1.0) * magnitude * 10.0 * deg;
    const double sc = 1.0 + rng.uniform(-1.0, 1.0) * 0.1 * magnitude;
    const double tx = rng.uniform(-1.0, 1.0) * magnitude * 5.0;
    const double ty = rng.uniform(-1.0, 1.0) * magnitude * 5.0;
    const double tz = rng.uniform(-1.0, 1.0) * magnitude * 5.0;

    const double cx = std::cos(rx), sx = std::sin(rx);
    const double cy = std::cos(ry), sy = std::sin(ry);
    const double cz = std::cos(rz), sz = std::sin(rz);
    const double R[3][3] = {
        {cy * cz, sx * sy * cz - cx * sz, cx * sy * cz + sx * sz},
        {cy * sz, sx * sy * sz + cx * cz, cx * sy * sz - sx * cz},
        {-sy, sx * cy, cx * cy}};
    const double ctr[3] = {0.5 * (dims[0] - 1), 0.5 * (dims[1] - 1),
                           0.5 * (dims[2] - 1)};
    const double t[3] = {tx, ty, tz};
    for (int r = 0; r < 3; ++r) {
        double ac = 0.0;
        for (int c = 0; c < 3; ++c) {
            A[r][c] = float(sc * R[r][c]);
            ac += sc * R[r][c] * ctr[c];
        }
        b[r] = float(ctr[r] - ac + t[r]);
    }
}

void warp_in_place(Volume3D& image, Volume3D& mask, const Mat3& A,
                   const Vec3& b) {
    const DDF ddf = affine_to_ddf(A, b, image.dims, image.spacing);
    image = warp_volume(image, ddf);
    mask = warp_volume(mask, ddf);
}

} // namespace

PairSample random_affine_augment(const PairSample& sample, double magnitude,
                                 Rng& rng) {
    if (magnitude < 0)
        throw std::invalid_argument("random_affine_augment: magnitude < 0");
    PairSample out = sample;
    if (magnitude == 0.0) return out;
    Mat3 A;
    Vec3 b;
    draw_affine(out.moving_image.dims, magnitude, rng, A, b);
    warp_in_place(out.moving_image, out.moving_mask, A, b);
    draw_affine(out.fixed_image.dims, magnitude, rng, A, b);
    warp_in_place(out.fixed_image, out.fixed_mask, A, b);
    return out;
}

} // namespace longreg

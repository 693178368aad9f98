#include "longreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "longreg/kern/blur.hpp"
#include "longreg/kern/common.hpp"
#include "longreg/lvr_io.hpp"
#include "longreg/volops.hpp"

namespace longreg {

void PhantomConfig::validate() const {
    for (int a = 0; a < 3; ++a)
        if (dims[a] < 16)
            throw std::invalid_argument("phantom: dims must be >= 16");
    if (visits_min < 2 || visits_max > 4 || visits_min > visits_max)
        throw std::invalid_argument("phantom: visits must lie in 2-4");
    if (magnitude < 0) throw std::invalid_argument("phantom: magnitude < 0");
    if (!(smoothness > 0))
        throw std::invalid_argument("phantom: smoothness <= 0");
    if (landmarks < 0) throw std::invalid_argument("phantom: landmarks < 0");
    if (!(texture > 0)) throw std::invalid_argument("phantom: texture <= 0");
}

DDF gen_smooth_ddf(const Dims3& dims, const Spacing3& spacing, double magnitude,
                   double smoothness, Rng& rng) {
    const std::size_t n = voxel_count(dims);
    DDF out;
    out.dims = dims;
    out.spacing = spacing;
    out.disp.assign(3 * n, 0.0f);
    if (magnitude == 0.0) return out;
    std::vector<float> noise(n), smooth(n);
    std::vector<std::vector<float>> comp(3);
    for (int c = 0; c < 3; ++c) {
        for (auto& v : noise) v = float(rng.normal());
        smooth.resize(n);
        kern::gauss_blur(noise.data(), smooth.data(), dims, smoothness);
        comp[c] = smooth;
    }
    std::vector<float> mag(n);
    for (std::size_t i = 0; i < n; ++i)
        mag[i] = std::sqrt(comp[0][i] * comp[0][i] + comp[1][i] * comp[1][i] +
                           comp[2][i] * comp[2][i]);
    std::vector<float> sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    const float q99 = sorted[std::size_t(0.99 * double(n - 1))];
    const float scale = q99 > 0 ? float(magnitude) / q99 : 0.0f;
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out.disp[3 * i + c] = scale * comp[c][i];
    return out;
}

namespace {

Volume3D smooth_noise(const Dims3& dims, const Spacing3& spacing, double std,
                      Rng& rng) {
    Volume3D v;
    v.dims = dims;
    v.spacing = spacing;
    v.data.resize(voxel_count(dims));
    std::vector<float> noise(v.data.size());
    for (auto& x : noise) x = float(rng.normal());
    kern::gauss_blur(noise.data(), v.data.data(), dims, std);
    return v;
}

struct Ellipsoid {
    double cx, cy, cz;
    double ax, ay, az;

    double level(double x, double y, double z) const {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
        return dx * dx + dy * dy + dz * dz;
    }
};

Volume3D binarize(const Volume3D& soft) {
    Volume3D out = soft;
    for (float& v : out.data) v = v >= 0.5f ? 1.0f : 0.0f;
    return out;
}

} // namespace

PhantomPatient gen_patient(const PhantomConfig& cfg, const std::string& id,
                           Rng& rng) {
    cfg.validate();
    const Dims3 d = cfg.dims;
    const std::size_t n = voxel_count(d);

    Ellipsoid gl;
    gl.cx = 0.5 * (d[0] - 1) + rng.uniform(-0.08, 0.08) * d[0];
    gl.cy = 0.5 * (d[1] - 1) + rng.uniform(-0.08, 0.08) * d[1];
    gl.cz = 0.5 * (d[2] - 1) + rng.uniform(-0.08, 0.08) * d[2];
    gl.ax = rng.uniform(0.18, 0.28) * d[0];
    gl.ay = rng.uniform(0.18, 0.28) * d[1];
    gl.az = rng.uniform(0.18, 0.28) * d[2];

    PhantomVisit base;
    base.gland.dims = d;
    base.gland.spacing = cfg.spacing;
    base.gland.data.assign(n, 0.0f);
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x)
                if (gl.level(x, y, z) <= 1.0)
                    base.gland.data[kern::lindex(d, x, y, z)] = 1.0f;

    Volume3D tex = smooth_noise(d, cfg.spacing, cfg.texture, rng);
    tex = normalize_intensity(tex);
    base.image.dims = d;
    base.image.spacing = cfg.spacing;
    base.image.data.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        base.image.data[i] =
            0.25f * tex.data[i] + (base.gland.data[i] > 0 ? 0.45f : 0.0f);

    // Landmark blobs: small spheres whose full extent stays inside the
    // gland, placed by rejection with a bounded retry budget. The radius
    // scales with the gland so small grids stay feasible.
    const double min_axis = std::min({gl.ax, gl.ay, gl.az});
    const double blob_r = std::clamp(0.35 * min_axis, 1.2, 3.0);
    const Ellipsoid inner{gl.cx,
                          gl.cy,
                          gl.cz,
                          std::max(gl.ax - blob_r, 0.5),
                          std::max(gl.ay - blob_r, 0.5),
                          std::max(gl.az - blob_r, 0.5)};
    for (int k = 0; k < cfg.landmarks; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const double px = gl.cx + rng.uniform(-1.0, 1.0) * inner.ax;
            const double py = gl.cy + rng.uniform(-1.0, 1.0) * inner.ay;
            const double pz = gl.cz + rng.uniform(-1.0, 1.0) * inner.az;
            if (inner.level(px, py, pz) > 1.0) continue;
            Volume3D blob;
            blob.dims = d;
            blob.spacing = cfg.spacing;
            blob.data.assign(n, 0.0f);
            for (int z = 0; z < d[2]; ++z)
                for (int y = 0; y < d[1]; ++y)
                    for (int x = 0; x < d[0]; ++x) {
                        const double dx = x - px, dy = y - py, dz = z - pz;
                        if (dx * dx + dy * dy + dz * dz <= blob_r * blob_r)
                            blob.data[kern::lindex(d, x, y, z)] = 1.0f;
                    }
            for (std::size_t i = 0; i < n; ++i)
                if (blob.data[i] > 0) base.image.data[i] = 0.95f;
            base.landmarks.marks.emplace_back(k, std::move(blob));
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("phantom: landmark placement failed");
    }

    const int visits =
        cfg.visits_min +
        int(rng.uniform_int(std::uint64_t(cfg.visits_max - cfg.visits_min + 1)));

    PhantomPatient out;
    out.id = id;
    out.visits.push_back(std::move(base));
    for (int v = 1; v < visits; ++v) {
        DDF u = gen_smooth_ddf(d, cfg.spacing, cfg.magnitude, cfg.smoothness,
                               rng);
        PhantomVisit& prev = out.visits.back();
        PhantomVisit next;
        next.image = warp_volume(prev.image, u);
        next.gland = binarize(warp_volume(prev.gland, u));
        for (const auto& [lid, mask] : prev.landmarks.marks) {
            Volume3D wm = binarize(warp_volume(mask, u));
            bool any = false;
            for (float x : wm.data)
                if (x > 0) {
                    any = true;
                    break;
                }
            if (!any)
                throw std::runtime_error(
                    "phantom: landmark vanished under deformation");
            next.landmarks.marks.emplace_back(lid, std::move(wm));
        }
        prev.gt_to_next = std::move(u);
        prev.has_gt = true;
        out.visits.push_back(std::move(next));
    }
    return out;
}

void write_cohort(const PhantomConfig& cfg, int patients,
                  const std::array<int, 3>& split_counts,
                  const std::string& out_dir) {
    cfg.validate();
    if (patients < 1) throw std::invalid_argument("write_cohort: no patients");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    Rng master(cfg.seed, 0);
    LongitudinalDataset ds;
    for (int p = 0; p < patients; ++p) {
        char pid[16];
        std::snprintf(pid, sizeof pid, "p%03d", p);
        Rng prng = master.fork(std::uint64_t(p) + 1);
        const PhantomPatient pat = gen_patient(cfg, pid, prng);
        Patient rec;
        rec.id = pat.id;
        for (std::size_t v = 0; v < pat.visits.size(); ++v) {
            const fs::path dir = fs::path(out_dir) / pat.id /
                                 ("v" + std::to_string(v));
            fs::create_directories(dir);
            const auto& pv = pat.visits[v];
            Visit rv;
            rv.time_months = 12.0 * double(v);
            rv.image_path = (dir / "image.lvr").string();
            rv.mask_path = (dir / "gland.lvr").string();
            write_volume(rv.image_path, pv.image);
            write_volume(rv.mask_path, pv.gland);
            for (const auto& [lid, mask] : pv.landmarks.marks) {
                const std::string lp =
                    (dir / ("lm" + std::to_string(lid) + ".lvr")).string();
                write_volume(lp, mask);
                rv.landmark_paths.push_back(lp);
            }
            if (pv.has_gt)
                write_ddf((dir / "gt_to_next.lvr").string(), pv.gt_to_next);
            rec.visits.push_back(std::move(rv));
        }
        ds.patients.push_back(std::move(rec));
    }
    save_manifest((fs::path(out_dir) / "manifest.txt").string(), ds);
    if (split_counts[0] + split_counts[1] + split_counts[2] > 0) {
        const auto parts = split_patients(ds, split_counts, cfg.seed);
        const char* names[3] = {"train.txt", "val.txt", "holdout.txt"};
        for (int i = 0; i < 3; ++i)
            save_manifest((fs::path(out_dir) / names[i]).string(), parts[i]);
    }
}

} // namespace longreg

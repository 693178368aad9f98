#include "longreg/evalstat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "longreg/losses.hpp"
#include "longreg/volops.hpp"

namespace longreg {

double binary_dsc(const Volume3D& a, const Volume3D& b, float threshold) {
    if (a.dims != b.dims)
        throw std::invalid_argument("binary_dsc: dim mismatch");
    long na = 0, nb = 0, nab = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool ia = a.data[i] >= threshold;
        const bool ib = b.data[i] >= threshold;
        na += ia;
        nb += ib;
        nab += ia && ib;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(nab) / double(na + nb);
}

double mse(const Volume3D& a, const Volume3D& b) { return ssd(a, b); }

double centroid_distance(const Volume3D& a, const Volume3D& b,
                         float threshold) {
    const Vec3 ca = centroid(a, threshold);
    const Vec3 cb = centroid(b, threshold);
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = double(ca[c]) - double(cb[c]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

TreResult tre(const LandmarkSet& moving, const LandmarkSet& fixed,
              const DDF& ddf) {
    std::map<int, const Volume3D*> fixed_by_id;
    for (const auto& [id, mask] : fixed.marks) fixed_by_id[id] = &mask;
    if (moving.marks.size() != fixed.marks.size())
        throw std::invalid_argument("tre: landmark count mismatch");
    TreResult out;
    for (const auto& [id, mask] : moving.marks) {
        const auto it = fixed_by_id.find(id);
        if (it == fixed_by_id.end())
            throw std::invalid_argument("tre: landmark id mismatch");
        try {
            const Volume3D warped = warp_volume(mask, ddf);
            out.mm.push_back(centroid_distance(warped, *it->second));
        } catch (const std::exception& e) {
            out.errors.push_back("landmark " + std::to_string(id) + ": " +
                                 e.what());
        }
    }
    return out;
}

namespace {

// Continued-fraction evaluation of the regularized incomplete beta
// function (Numerical Recipes form).
double betacf(double a, double b, double x) {
    const int maxit = 200;
    const double eps = 3.0e-12, fpmin = 1.0e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= maxit; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                               std::lgamma(b) + a * std::log(x) +
                               b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

} // namespace

TTest paired_ttest(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("paired_ttest: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("paired_ttest: need n >= 2");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
    mean /= double(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / double(n - 1));
    TTest out;
    if (sd == 0.0) {
        if (mean == 0.0) return {0.0, 1.0};
        out.t = mean > 0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
        out.p = 0.0;
        return out;
    }
    const double df = double(n - 1);
    out.t = mean / (sd / std::sqrt(double(n)));
    out.p = betai(0.5 * df, 0.5, df / (df + out.t * out.t));
    return out;
}

PairMode pair_mode_from_string(std::string_view s) {
    if (s == "if") return PairMode::IF;
    if (s == "if+ib") return PairMode::IF_IB;
    throw std::invalid_argument("unknown pair mode: " + std::string(s));
}

Registrar identity_registrar() {
    return [](const EvalCaseInput& in) {
        DDF ddf;
        ddf.dims = in.fixed_image.dims;
        ddf.spacing = in.fixed_image.spacing;
        ddf.disp.assign(3 * voxel_count(ddf.dims), 0.0f);
        return ddf;
    };
}

namespace {

struct CaseRow {
    std::string pair_id;
    bool ok = false;
    double dsc = 0, cd = 0, mse_v = 0;
    std::vector<double> tre_mm;
    std::string error;
};

MetricSummary summarize(const std::vector<double>& v) {
    MetricSummary s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= double(v.size());
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / double(v.size() - 1));
    return s;
}

double vec_mean(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / double(v.size());
}

LandmarkSet load_landmarks(VolumeStore& store, const Visit& v) {
    LandmarkSet out;
    for (std::size_t i = 0; i < v.landmark_paths.size(); ++i)
        out.marks.emplace_back(int(i), store.get(v.landmark_paths[i]));
    return out;
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

EvalSummary evaluate_run(const LongitudinalDataset& holdout, VolumeStore& store,
                         PairMode mode, const Registrar& registrar,
                         const std::string& out_csv) {
    if (holdout.patients.empty())
        throw std::invalid_argument("evaluate_run: empty holdout set");

    std::vector<CaseRow> reg_rows, pre_rows;
    for (const auto& patient : holdout.patients) {
        const int nv = int(patient.visits.size());
        for (int i = 0; i < nv; ++i)
            for (int j = 0; j < nv; ++j) {
                if (i == j) continue;
                if (mode == PairMode::IF && i > j) continue;
                EvalCaseInput in;
                in.pair_id = patient.id + "_v" + std::to_string(i) + "_v" +
                             std::to_string(j);
                CaseRow reg, pre;
                reg.pair_id = pre.pair_id = in.pair_id;
                try {
                    const Visit& mv = patient.visits[std::size_t(i)];
                    const Visit& fv = patient.visits[std::size_t(j)];
                    in.moving_image = store.get(mv.image_path);
                    in.moving_mask = store.get(mv.mask_path);
                    in.fixed_image = store.get(fv.image_path);
                    in.fixed_mask = store.get(fv.mask_path);
                    in.moving_landmarks = load_landmarks(store, mv);
                    in.fixed_landmarks = load_landmarks(store, fv);

                    pre.dsc = binary_dsc(in.moving_mask, in.fixed_mask);
                    pre.cd = centroid_distance(in.moving_mask, in.fixed_mask);
                    pre.mse_v = mse(in.moving_image, in.fixed_image);
                    DDF zero;
                    zero.dims = in.fixed_image.dims;
                    zero.spacing = in.fixed_image.spacing;
                    zero.disp.assign(3 * voxel_count(zero.dims), 0.0f);
                    const TreResult pre_tre =
                        tre(in.moving_landmarks, in.fixed_landmarks, zero);
                    pre.tre_mm = pre_tre.mm;
                    pre.ok = true;

                    const DDF ddf = registrar(in);
                    if (ddf.dims != in.fixed_image.dims)
                        throw std::runtime_error("registrar returned wrong grid");
                    const Volume3D wmask = warp_volume(in.moving_mask, ddf);
                    const Volume3D wimg = warp_volume(in.moving_image, ddf);
                    reg.dsc = binary_dsc(wmask, in.fixed_mask);
                    reg.cd = centroid_distance(wmask, in.fixed_mask);
                    reg.mse_v = mse(wimg, in.fixed_image);
                    TreResult rt =
                        tre(in.moving_landmarks, in.fixed_landmarks, ddf);
                    reg.tre_mm = rt.mm;
                    for (const auto& e : rt.errors)
                        reg.error += (reg.error.empty() ? "" : "; ") + e;
                    reg.ok = true;
                } catch (const std::exception& e) {
                    reg.ok = false;
                    reg.error = e.what();
                }
                reg_rows.push_back(std::move(reg));
                pre_rows.push_back(std::move(pre));
            }
    }

    std::vector<double> dscs, cds, mses, tres;
    std::vector<double> pdscs, pcds, pmses, ptres;
    for (std::size_t k = 0; k < reg_rows.size(); ++k) {
        if (!reg_rows[k].ok) continue;
        dscs.push_back(reg_rows[k].dsc);
        cds.push_back(reg_rows[k].cd);
        mses.push_back(reg_rows[k].mse_v);
        if (!reg_rows[k].tre_mm.empty())
            tres.push_back(vec_mean(reg_rows[k].tre_mm));
        pdscs.push_back(pre_rows[k].dsc);
        pcds.push_back(pre_rows[k].cd);
        pmses.push_back(pre_rows[k].mse_v);
        if (!pre_rows[k].tre_mm.empty())
            ptres.push_back(vec_mean(pre_rows[k].tre_mm));
    }

    EvalSummary s;
    for (const auto& r : reg_rows) (r.ok ? s.cases_ok : s.cases_failed) += 1;
    s.dsc = summarize(dscs);
    s.cd = summarize(cds);
    s.mse = summarize(mses);
    s.tre = summarize(tres);
    s.pre_dsc = summarize(pdscs);
    s.pre_cd = summarize(pcds);
    s.pre_mse = summarize(pmses);
    s.pre_tre = summarize(ptres);

    std::ofstream os(out_csv);
    if (!os) throw std::runtime_error("cannot open " + out_csv);
    os << "pair_id,dsc,cd_mm,mse,tre_mm_mean,tre_mm_per_landmark,error\n";
    for (const auto& r : reg_rows) {
        if (!r.ok) {
            os << r.pair_id << ",,,,,," << sanitize(r.error) << '\n';
            continue;
        }
        os << r.pair_id << ',' << fmt(r.dsc) << ',' << fmt(r.cd) << ','
           << fmt(r.mse_v) << ',';
        if (!r.tre_mm.empty()) os << fmt(vec_mean(r.tre_mm));
        os << ',';
        for (std::size_t i = 0; i < r.tre_mm.size(); ++i)
            os << (i ? ";" : "") << fmt(r.tre_mm[i]);
        os << ',' << sanitize(r.error) << '\n';
    }
    auto srow = [&](const char* tag, const MetricSummary& d,
                    const MetricSummary& c, const MetricSummary& m,
                    const MetricSummary& t, bool sd) {
        os << tag << ',' << fmt(sd ? d.sd : d.mean) << ','
           << fmt(sd ? c.sd : c.mean) << ',' << fmt(sd ? m.sd : m.mean) << ','
           << fmt(sd ? t.sd : t.mean) << ",,\n";
    };
    srow("__mean__", s.dsc, s.cd, s.mse, s.tre, false);
    srow("__sd__", s.dsc, s.cd, s.mse, s.tre, true);
    srow("__prereg_mean__", s.pre_dsc, s.pre_cd, s.pre_mse, s.pre_tre, false);
    srow("__prereg_sd__", s.pre_dsc, s.pre_cd, s.pre_mse, s.pre_tre, true);
    if (!os) throw std::runtime_error("write failed for " + out_csv);
    return s;
}

std::vector<ReportRow> read_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("empty report " + path);
    if (line.rfind("pair_id,", 0) != 0)
        throw std::runtime_error("bad report header in " + path);
    std::vector<ReportRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        f.push_back(cur);
        if (f.size() != 7)
            throw std::runtime_error("bad report row in " + path);
        if (f[0].rfind("__", 0) == 0) continue; // summary rows
        if (f[1].empty()) continue;             // failed case
        ReportRow r;
        r.pair_id = f[0];
        r.dsc = std::stod(f[1]);
        r.cd = std::stod(f[2]);
        r.mse = std::stod(f[3]);
        if (!f[4].empty()) {
            r.tre_mean = std::stod(f[4]);
            r.has_tre = true;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace longreg

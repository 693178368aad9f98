// longreg: longitudinal deformable registration toolkit.
//
// Subcommands: gen, train, register, ffd, eval, stats. Exit codes: 0 on
// success, 1 on usage errors, 2 on runtime failures (for eval: 2 only when
// every case failed).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "longreg/evalstat.hpp"
#include "longreg/ffd.hpp"
#include "longreg/lvr_io.hpp"
#include "longreg/netgrad.hpp"
#include "longreg/phantom.hpp"
#include "longreg/trainer.hpp"
#include "longreg/volops.hpp"

namespace {

using namespace longreg;

struct GenSpec {
    PhantomConfig phantom;
    int patients = 20;
    std::array<int, 3> split = {0, 0, 0}; // train, val, holdout
};

GenSpec parse_gen_config(const std::string& path) {
    auto kv = parse_kv(path);
    GenSpec g;
    auto take = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::string();
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    if (auto v = take("dims"); !v.empty()) {
        const int n = std::stoi(v);
        g.phantom.dims = {n, n, n};
    }
    if (auto v = take("spacing"); !v.empty()) {
        const float s = std::stof(v);
        g.phantom.spacing = {s, s, s};
    }
    if (auto v = take("patients"); !v.empty()) g.patients = std::stoi(v);
    if (auto v = take("train"); !v.empty()) g.split[0] = std::stoi(v);
    if (auto v = take("val"); !v.empty()) g.split[1] = std::stoi(v);
    if (auto v = take("holdout"); !v.empty()) g.split[2] = std::stoi(v);
    if (auto v = take("visits_min"); !v.empty())
        g.phantom.visits_min = std::stoi(v);
    if (auto v = take("visits_max"); !v.empty())
        g.phantom.visits_max = std::stoi(v);
    if (auto v = take("magnitude"); !v.empty())
        g.phantom.magnitude = std::stod(v);
    if (auto v = take("smoothness"); !v.empty())
        g.phantom.smoothness = std::stod(v);
    if (auto v = take("landmarks"); !v.empty())
        g.phantom.landmarks = std::stoi(v);
    if (auto v = take("texture"); !v.empty()) g.phantom.texture = std::stod(v);
    if (auto v = take("seed"); !v.empty())
        g.phantom.seed = std::uint64_t(std::stoull(v));
    if (!kv.empty())
        throw std::invalid_argument("unknown config key: " + kv.begin()->first);
    g.phantom.validate();
    if (g.patients < 1) throw std::invalid_argument("gen: patients < 1");
    if (g.split[0] + g.split[1] + g.split[2] > g.patients)
        throw std::invalid_argument("gen: split exceeds patient count");
    return g;
}

int run_gen(const std::string& config, const std::string& out, long seed) {
    GenSpec g = parse_gen_config(config);
    if (seed >= 0) g.phantom.seed = std::uint64_t(seed);
    write_cohort(g.phantom, g.patients, g.split, out);
    std::printf("wrote cohort of %d patients to %s\n", g.patients,
                out.c_str());
    return 0;
}

int run_train(const std::string& manifest, const std::string& config,
              const std::string& strategy, const std::string& mmd,
              const std::string& out, long seed) {
    TrainConfig cfg = parse_train_config(config);
    cfg.strategy = strategy_from_string(strategy);
    cfg.use_mmd = mmd == "on";
    if (seed >= 0) cfg.seed = std::uint64_t(seed);
    cfg.validate();

    LongitudinalDataset train_ds = load_manifest(manifest);
    LongitudinalDataset val_ds;
    // A sibling val.txt (as written by gen) drives validation checkpoints.
    const auto val_path =
        std::filesystem::path(manifest).parent_path() / "val.txt";
    if (std::filesystem::exists(val_path))
        val_ds = load_manifest(val_path.string());

    const TrainResult res = train(train_ds, val_ds, cfg, out);
    std::printf("trained %ld iterations; loss %.6g -> %.6g\n",
                cfg.iterations, res.log.front().j, res.log.back().j);
    std::printf("checkpoints: %s", res.last_ckpt.c_str());
    if (res.best_val_dsc >= 0)
        std::printf(", %s (val DSC %.4f)", res.best_ckpt.c_str(),
                    res.best_val_dsc);
    std::printf("\nlog: %s\n", res.log_csv.c_str());
    return 0;
}

int run_register(const std::string& ckpt, const std::string& moving,
                 const std::string& fixed, const std::string& out) {
    const RegNetParams params = load_checkpoint(ckpt);
    const Volume3D mv = read_volume(moving);
    const Volume3D fx = read_volume(fixed);
    auto [ddf, feat] = regnet_apply(params, mv, fx);
    const Volume3D warped = warp_volume(mv, ddf);
    std::filesystem::create_directories(out);
    const auto dir = std::filesystem::path(out);
    write_ddf((dir / "ddf.lvr").string(), ddf);
    write_volume((dir / "warped.lvr").string(), warped);
    std::printf("wrote %s and %s\n", (dir / "ddf.lvr").c_str(),
                (dir / "warped.lvr").c_str());
    return 0;
}

int run_ffd(const std::string& moving, const std::string& fixed,
            int cp_spacing, int iters, const std::string& out) {
    const Volume3D mv = read_volume(moving);
    const Volume3D fx = read_volume(fixed);
    FfdConfig cfg;
    cfg.cp_spacing = cp_spacing;
    cfg.iterations = iters;
    const FfdResult res = ffd_register(mv, fx, cfg);
    const Volume3D warped = warp_volume(mv, res.ddf);
    std::filesystem::create_directories(out);
    const auto dir = std::filesystem::path(out);
    write_ddf((dir / "ddf.lvr").string(), res.ddf);
    write_volume((dir / "warped.lvr").string(), warped);
    std::ofstream trace(dir / "trace.csv");
    trace << "iteration,loss\n";
    for (std::size_t i = 0; i < res.trace.size(); ++i)
        trace << i << ',' << res.trace[i] << '\n';
    std::printf("ffd loss %.6g -> %.6g over %zu iterations\n",
                res.trace.front(), res.trace.back(), res.trace.size());
    return 0;
}

int run_eval(const std::string& manifest, const std::string& pairs,
             const std::string& ckpt, bool use_ffd, bool use_identity,
             const std::string& out) {
    const LongitudinalDataset ds = load_manifest(manifest);
    VolumeStore store;
    Registrar reg;
    if (use_identity) {
        reg = identity_registrar();
    } else if (use_ffd) {
        reg = [](const EvalCaseInput& in) {
            return ffd_register(in.moving_image, in.fixed_image, FfdConfig{})
                .ddf;
        };
    } else {
        auto params = std::make_shared<RegNetParams>(load_checkpoint(ckpt));
        reg = [params](const EvalCaseInput& in) {
            return regnet_apply(*params, in.moving_image, in.fixed_image)
                .first;
        };
    }
    const EvalSummary s =
        evaluate_run(ds, store, pair_mode_from_string(pairs), reg, out);
    std::printf("evaluated %d cases (%d failed)\n", s.cases_ok,
                s.cases_failed);
    std::printf("  dsc  %.4f (pre %.4f)\n", s.dsc.mean, s.pre_dsc.mean);
    std::printf("  cd   %.4f (pre %.4f) mm\n", s.cd.mean, s.pre_cd.mean);
    std::printf("  mse  %.6f (pre %.6f)\n", s.mse.mean, s.pre_mse.mean);
    std::printf("  tre  %.4f (pre %.4f) mm\n", s.tre.mean, s.pre_tre.mean);
    std::printf("report: %s\n", out.c_str());
    return s.cases_ok > 0 ? 0 : 2;
}

int run_stats(const std::string& report_a, const std::string& report_b,
              const std::string& metric) {
    const auto rows_a = read_report(report_a);
    const auto rows_b = read_report(report_b);
    auto pick = [&](const ReportRow& r, bool& ok) {
        ok = true;
        if (metric == "dsc") return r.dsc;
        if (metric == "cd") return r.cd;
        if (metric == "mse") return r.mse;
        ok = r.has_tre;
        return r.tre_mean;
    };
    std::map<std::string, ReportRow> by_id;
    for (const auto& r : rows_b) by_id[r.pair_id] = r;
    std::vector<double> x, y;
    for (const auto& ra : rows_a) {
        const auto it = by_id.find(ra.pair_id);
        if (it == by_id.end()) continue;
        bool ok_a = false, ok_b = false;
        const double va = pick(ra, ok_a);
        const double vb = pick(it->second, ok_b);
        if (ok_a && ok_b) {
            x.push_back(va);
            y.push_back(vb);
        }
    }
    const TTest tt = paired_ttest(x, y);
    std::printf("metric=%s n=%zu t=%.6g p=%.6g\n", metric.c_str(), x.size(),
                tt.t, tt.p);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"longitudinal deformable registration toolkit"};
    app.require_subcommand(1);

    std::string config, out, manifest, strategy = "if", mmd = "off";
    std::string ckpt, moving, fixed, pairs = "if";
    std::string report_a, report_b, metric = "dsc";
    int cp_spacing = FfdConfig{}.cp_spacing, iters = FfdConfig{}.iterations;
    long seed = -1;
    bool use_ffd = false, use_identity = false;

    auto* gen = app.add_subcommand("gen", "generate a phantom cohort");
    gen->add_option("--config", config)->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out)->required();
    gen->add_option("--seed", seed, "override the config seed");

    auto* train = app.add_subcommand("train", "train a registration network");
    train->add_option("--manifest", manifest)
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--config", config)->required()->check(CLI::ExistingFile);
    train->add_option("--strategy", strategy)
        ->required()
        ->check(CLI::IsMember({"if", "if+ib", "it+if+ib"}));
    train->add_option("--mmd", mmd)
        ->required()
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--out", out)->required();
    train->add_option("--seed", seed, "override the config seed");

    auto* reg = app.add_subcommand("register", "apply a trained network");
    reg->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    reg->add_option("--moving", moving)->required()->check(CLI::ExistingFile);
    reg->add_option("--fixed", fixed)->required()->check(CLI::ExistingFile);
    reg->add_option("--out", out)->required();

    auto* ffd = app.add_subcommand("ffd", "iterative B-spline baseline");
    ffd->add_option("--moving", moving)->required()->check(CLI::ExistingFile);
    ffd->add_option("--fixed", fixed)->required()->check(CLI::ExistingFile);
    ffd->add_option("--cp-spacing", cp_spacing)->check(CLI::PositiveNumber);
    ffd->add_option("--iters", iters)->check(CLI::PositiveNumber);
    ffd->add_option("--out", out)->required();

    auto* eval = app.add_subcommand("eval", "evaluate on a holdout manifest");
    eval->add_option("--manifest", manifest)
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--pairs", pairs)
        ->check(CLI::IsMember({"if", "if+ib"}));
    auto* eo_ckpt = eval->add_option("--ckpt", ckpt)->check(CLI::ExistingFile);
    auto* eo_ffd = eval->add_flag("--ffd", use_ffd);
    auto* eo_id = eval->add_flag("--identity", use_identity);
    eo_ckpt->excludes(eo_ffd)->excludes(eo_id);
    eo_ffd->excludes(eo_id);
    eval->add_option("--out", out)->required();

    auto* stats = app.add_subcommand("stats", "paired t-test on two reports");
    stats->add_option("--report-a", report_a)
        ->required()
        ->check(CLI::ExistingFile);
    stats->add_option("--report-b", report_b)
        ->required()
        ->check(CLI::ExistingFile);
    stats->add_option("--metric", metric)
        ->check(CLI::IsMember({"dsc", "cd", "mse", "tre"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // usage errors collapse onto exit code 1
    }

    try {
        if (gen->parsed()) return run_gen(config, out, seed);
        if (train->parsed())
            return run_train(manifest, config, strategy, mmd, out, seed);
        if (reg->parsed()) return run_register(ckpt, moving, fixed, out);
        if (ffd->parsed())
            return run_ffd(moving, fixed, cp_spacing, iters, out);
        if (eval->parsed()) {
            if (ckpt.empty() && !use_ffd && !use_identity) {
                std::fprintf(stderr,
                             "eval: one of --ckpt, --ffd, --identity is "
                             "required\n");
                return 1;
            }
            return run_eval(manifest, pairs, ckpt, use_ffd, use_identity,
                            out);
        }
        if (stats->parsed()) return run_stats(report_a, report_b, metric);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

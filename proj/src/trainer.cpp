#include "longreg/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "longreg/evalstat.hpp"
#include "longreg/volops.hpp"

namespace longreg {

void TrainConfig::validate() const {
    weights.validate();
    arch.validate();
    if (batch < 1) throw std::invalid_argument("train: batch < 1");
    if (iterations < 1) throw std::invalid_argument("train: iterations < 1");
    if (!(lr >= 0)) throw std::invalid_argument("train: bad learning rate");
    if (augment < 0) throw std::invalid_argument("train: augment < 0");
    if (use_mmd) {
        if (batch < 2)
            throw std::invalid_argument("train: use_mmd needs batch >= 2");
        if (strategy == Strategy::IF)
            throw std::invalid_argument(
                "train: use_mmd needs two pair-type groups (strategy if+ib "
                "or it+if+ib)");
    }
}

std::map<std::string, std::string> parse_kv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        const std::string key = strip(line.substr(0, eq));
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty key");
        kv[key] = strip(line.substr(eq + 1));
    }
    return kv;
}

namespace {

std::vector<float> parse_float_list(const std::string& s) {
    std::vector<float> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stof(item));
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (float v : parse_float_list(s)) out.push_back(int(v));
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw std::invalid_argument("bad boolean value: " + s);
}

} // namespace

TrainConfig parse_train_config(const std::string& path) {
    auto kv = parse_kv(path);
    TrainConfig cfg;
    auto take = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::string();
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    if (auto v = take("alpha"); !v.empty()) cfg.weights.alpha = std::stof(v);
    if (auto v = take("beta"); !v.empty()) cfg.weights.beta = std::stof(v);
    if (auto v = take("gamma"); !v.empty()) cfg.weights.gamma = std::stof(v);
    if (auto v = take("lambda"); !v.empty()) cfg.weights.lambda = std::stof(v);
    if (auto v = take("sigma"); !v.empty()) {
        if (v == "median") {
            cfg.sigma_median = true;
        } else {
            cfg.sigma_median = false;
            cfg.weights.sigma = std::stof(v);
        }
    }
    if (auto v = take("dice_scales"); !v.empty())
        cfg.weights.dice_scales = parse_float_list(v);
    if (auto v = take("eps"); !v.empty()) cfg.weights.eps = std::stof(v);
    if (auto v = take("strategy"); !v.empty())
        cfg.strategy = strategy_from_string(v);
    if (auto v = take("batch"); !v.empty()) cfg.batch = std::stoi(v);
    if (auto v = take("iterations"); !v.empty()) cfg.iterations = std::stol(v);
    if (auto v = take("lr"); !v.empty()) cfg.lr = std::stod(v);
    if (auto v = take("seed"); !v.empty())
        cfg.seed = std::uint64_t(std::stoull(v));
    if (auto v = take("val_every"); !v.empty()) cfg.val_every = std::stol(v);
    if (auto v = take("ckpt_every"); !v.empty()) cfg.ckpt_every = std::stol(v);
    if (auto v = take("use_mmd"); !v.empty()) cfg.use_mmd = parse_bool(v);
    if (auto v = take("augment"); !v.empty()) cfg.augment = std::stod(v);
    if (auto v = take("levels"); !v.empty()) cfg.arch.levels = std::stoi(v);
    if (auto v = take("channels"); !v.empty())
        cfg.arch.channels = parse_int_list(v);
    if (auto v = take("kernel"); !v.empty()) cfg.arch.kernel = std::stoi(v);
    if (!kv.empty())
        throw std::invalid_argument("unknown config key: " + kv.begin()->first);
    cfg.validate();
    return cfg;
}

EqTerms pair_terms(const Volume3D& warped_image, const Volume3D& warped_mask,
                   const DDF& ddf, const Volume3D& fixed_image,
                   const Volume3D& fixed_mask, const LossWeights& w) {
    EqTerms t;
    t.dice = multiscale_dice(warped_mask, fixed_mask, w);
    t.ssd = ssd(warped_image, fixed_image);
    t.be = bending_energy(ddf);
    return t;
}

double loss_eq1(const std::vector<EqTerms>& terms, const LossWeights& w) {
    if (terms.empty()) throw std::invalid_argument("loss_eq1: empty batch");
    double acc = 0.0;
    for (const auto& t : terms)
        acc += -double(w.alpha) * t.dice + double(w.beta) * t.ssd +
               double(w.gamma) * t.be;
    return acc / double(terms.size());
}

double loss_eq3(double j, double mmd_value, const LossWeights& w) {
    return j + double(w.lambda) * mmd_value;
}

RegOut register_pair(const RegNetParams& params, const Volume3D& moving_image,
                     const Volume3D& moving_mask, const Volume3D& fixed_image) {
    auto [ddf, feat] = regnet_apply(params, moving_image, fixed_image);
    RegOut out;
    out.warped_image = warp_volume(moving_image, ddf);
    out.warped_mask = warp_volume(moving_mask, ddf);
    out.ddf = std::move(ddf);
    return out;
}

double validation_dsc(const RegNetParams& params,
                      const LongitudinalDataset& ds, VolumeStore& store) {
    double acc = 0.0;
    long n = 0;
    for (const auto& p : ds.patients)
        for (std::size_t i = 0; i < p.visits.size(); ++i)
            for (std::size_t j = i + 1; j < p.visits.size(); ++j) {
                const auto& mv = p.visits[i];
                const auto& fv = p.visits[j];
                const auto out =
                    register_pair(params, store.get(mv.image_path),
                                  store.get(mv.mask_path),
                                  store.get(fv.image_path));
                acc += binary_dsc(out.warped_mask, store.get(fv.mask_path));
                ++n;
            }
    if (n == 0) throw std::invalid_argument("validation_dsc: no pairs");
    return acc / double(n);
}

TrainResult train(const LongitudinalDataset& train_ds,
                  const LongitudinalDataset& val_ds, const TrainConfig& cfg,
                  const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    RegNetParams params = init_regnet(cfg.arch, cfg.seed);
    Rng sample_rng(cfg.seed, 1);
    Rng aug_rng(cfg.seed, 2);
    AdamState st;
    st.lr = cfg.lr;
    VolumeStore store;

    TrainResult res;
    res.last_ckpt = (fs::path(out_dir) / "last.lrck").string();
    res.best_ckpt = (fs::path(out_dir) / "best.lrck").string();
    res.log_csv = (fs::path(out_dir) / "train_log.csv").string();
    res.val_csv = (fs::path(out_dir) / "val_log.csv").string();

    std::ofstream log(res.log_csv);
    if (!log) throw std::runtime_error("cannot open " + res.log_csv);
    log << "iteration,J,dice,ssd,be,mmd\n";
    std::ofstream vlog(res.val_csv);
    if (!vlog) throw std::runtime_error("cannot open " + res.val_csv);
    vlog << "iteration,val_dsc\n";

    const auto& w = cfg.weights;
    const bool with_mmd = cfg.use_mmd && w.lambda > 0.0f;

    for (long it = 1; it <= cfg.iterations; ++it) {
        auto batch = compose_minibatch(train_ds, store, cfg.strategy, cfg.batch,
                                       sample_rng);
        if (cfg.augment > 0.0)
            for (auto& s : batch)
                s = random_affine_augment(s, cfg.augment, aug_rng);

        Tape<float> tape;
        const auto pids = bind_params(tape, params.tensors, true);
        std::vector<int> jp, feats;
        std::vector<PairType> tags;
        IterLog row;
        row.iteration = it;
        const std::vector<float> scales = w.dice_scales;
        for (const auto& s : batch) {
            const int mimg = tape.leaf(vol_tensor<float>(s.moving_image));
            const int mmask = tape.leaf(vol_tensor<float>(s.moving_mask));
            const int fimg = tape.leaf(vol_tensor<float>(s.fixed_image));
            const int fmask = tape.leaf(vol_tensor<float>(s.fixed_mask));
            const int input =
                tape.leaf(stack_pair<float>(s.moving_image, s.fixed_image));
            const auto fw = regnet_forward(tape, cfg.arch, pids, input);
            const int wimg = tape.warp(mimg, fw.ddf);
            const int wmask = tape.warp(mmask, fw.ddf);
            const int sn = tape.ssd(wimg, fimg);
            const int dn = tape.msdice(wmask, fmask, scales, double(w.eps));
            const int bn = tape.bending(fw.ddf);
            jp.push_back(tape.affine({{-double(w.alpha), dn},
                                      {double(w.beta), sn},
                                      {double(w.gamma), bn}},
                                     0.0));
            feats.push_back(fw.feat);
            tags.push_back(s.tag);
            row.dice += tape.scalar(dn);
            row.ssd += tape.scalar(sn);
            row.be += tape.scalar(bn);
        }
        const double invn = 1.0 / double(batch.size());
        row.dice *= invn;
        row.ssd *= invn;
        row.be *= invn;
        std::vector<std::pair<double, int>> mean_terms;
        for (int id : jp) mean_terms.emplace_back(invn, id);
        const int j_node = tape.affine(std::move(mean_terms), 0.0);
        row.j = tape.scalar(j_node);

        int loss_node = j_node;
        if (with_mmd) {
            // IF+IB discriminates {IF} vs {IB}; IT+IF+IB discriminates the
            // intra-subject pairs {IF u IB} vs the inter-subject {IT}.
            std::vector<int> gi, gj;
            for (std::size_t k = 0; k < feats.size(); ++k) {
                const bool in_i = cfg.strategy == Strategy::IF_IB
                                      ? tags[k] == PairType::IF
                                      : tags[k] != PairType::IT;
                (in_i ? gi : gj).push_back(feats[k]);
            }
            if (gi.empty() || gj.empty())
                throw std::runtime_error("train: an MMD group is empty");
            double sigma = double(w.sigma);
            if (cfg.sigma_median) {
                std::vector<FeatureVec> all;
                for (int id : feats)
                    all.push_back(FeatureVec{tape.val(id).data, PairType::IF});
                sigma = median_sigma(all);
            }
            const int mn = tape.mmd(gi, gj, sigma);
            row.mmd = tape.scalar(mn);
            loss_node =
                tape.affine({{1.0, j_node}, {double(w.lambda), mn}}, 0.0);
        }

        const double loss_value = tape.scalar(loss_node);
        if (!std::isfinite(loss_value)) {
            std::ostringstream msg;
            msg << "train: non-finite loss at iteration " << it
                << " (J=" << row.j << ", dice=" << row.dice
                << ", ssd=" << row.ssd << ", be=" << row.be
                << ", mmd=" << row.mmd << ")";
            throw std::runtime_error(msg.str());
        }

        tape.backward(loss_node);
        ParamMapT<float> grads;
        for (const auto& [name, id] : pids) grads[name] = tape.grad(id);
        adam_step(params.tensors, grads, st);

        char buf[160];
        std::snprintf(buf, sizeof buf, "%ld,%.8g,%.8g,%.8g,%.8g,%.8g\n", it,
                      row.j, row.dice, row.ssd, row.be, row.mmd);
        log << buf;
        res.log.push_back(row);

        if (cfg.val_every > 0 && it % cfg.val_every == 0 &&
            !val_ds.patients.empty()) {
            const double dsc = validation_dsc(params, val_ds, store);
            vlog << it << ',' << dsc << '\n';
            if (dsc > res.best_val_dsc) {
                res.best_val_dsc = dsc;
                save_checkpoint(res.best_ckpt, params);
            }
        }
        if (cfg.ckpt_every > 0 && it % cfg.ckpt_every == 0)
            save_checkpoint(res.last_ckpt, params);
    }
    save_checkpoint(res.last_ckpt, params);
    if (res.best_val_dsc < 0) save_checkpoint(res.best_ckpt, params);
    if (!log || !vlog)
        throw std::runtime_error("train: log write failed in " + out_dir);
    return res;
}

} // namespace longreg

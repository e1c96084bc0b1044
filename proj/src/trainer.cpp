#include "umyops/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace umyops::train {

using data::kSeqBssfp;
using data::kSeqLge;
using data::kSeqT2;
using nn::Var;
using nlohmann::json;

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw InvalidArgument("TrainConfig: stage must be 1 or 2");
    if (!(learning_rate > 0)) throw InvalidArgument("TrainConfig: bad learning rate");
    if (batch_size < 1 || max_steps < 1) throw InvalidArgument("TrainConfig: bad batch/steps");
    if (!(lambda_balance >= 0)) throw InvalidArgument("TrainConfig: bad lambda");
    if (convergence_patience < 1 || eval_interval < 1)
        throw InvalidArgument("TrainConfig: bad patience/interval");
}

json TrainConfig::to_json() const {
    return json{{"schema", "umyops-trainconfig-v1"},
                {"stage", stage},
                {"learning_rate", learning_rate},
                {"batch_size", batch_size},
                {"max_steps", max_steps},
                {"lambda_balance", lambda_balance},
                {"seed", seed},
                {"checkpoint_dir", checkpoint_dir},
                {"convergence_patience", convergence_patience},
                {"eval_interval", eval_interval},
                {"smooth_eps", smooth_eps},
                {"prior_mode", prior_mode == PriorMode::True      ? "true"
                               : prior_mode == PriorMode::Uniform ? "uniform"
                                                                  : "shuffled"},
                {"augment_flips", augment_flips}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (j.value("schema", "") != "umyops-trainconfig-v1")
        throw IoError("TrainConfig: unknown schema");
    TrainConfig c;
    c.stage = j.value("stage", 1);
    c.learning_rate = j.value("learning_rate", c.stage == 2 ? 5e-4 : 1e-3);
    c.batch_size = j.value("batch_size", 8);
    c.max_steps = j.value("max_steps", 600);
    c.lambda_balance = j.value("lambda_balance", 0.1);
    c.seed = j.value("seed", 0ULL);
    c.checkpoint_dir = j.value("checkpoint_dir", "");
    c.convergence_patience = j.value("convergence_patience", 10);
    c.eval_interval = j.value("eval_interval", 25);
    c.smooth_eps = j.value("smooth_eps", 1e-5);
    const std::string pm = j.value("prior_mode", "true");
    c.prior_mode = pm == "uniform"    ? PriorMode::Uniform
                   : pm == "shuffled" ? PriorMode::Shuffled
                                      : PriorMode::True;
    c.augment_flips = j.value("augment_flips", false);
    c.validate();
    return c;
}

TrainSample prepare_sample(const data::MultiSeqSlice& slice) {
    if (!slice.consistent()) throw InvalidArgument("prepare_sample: inconsistent slice");
    if (slice.h != slice.w) throw InvalidArgument("prepare_sample: raster must be square");
    TrainSample s;
    s.size = slice.h;
    s.spacing = slice.spacing;
    for (const auto& [seq, img] : slice.images) {
        ImageD z = img;
        data::zscore(z);
        s.images[seq] = nn::from_image(z);
    }
    for (const auto& [seq, mask] : slice.labels) {
        s.labels[seq] = mask;
        auto oh = data::anatomy_onehot(mask);
        nn::Tensor t(3, slice.h, slice.w, 0.0f);
        for (int cls = 0; cls < 3; ++cls)
            for (int r = 0; r < slice.h; ++r)
                for (int c = 0; c < slice.w; ++c)
                    t.at(cls, r, c) = static_cast<float>(oh[cls](r, c));
        s.anatomy_tensor[seq] = std::move(t);
        s.myo[seq] = oh[0];
        s.anatomy[seq] = std::move(oh);
    }
    if (slice.gold_common) {
        // keep only pathology codes; anything else is ignored for this loss
        data::LabelMask gold(slice.h, slice.w, data::BG);
        for (size_t i = 0; i < gold.size(); ++i) {
            const uint8_t v = slice.gold_common->raw()[i];
            if (v == data::SCAR || v == data::EDEMA) gold.raw()[i] = v;
        }
        s.gold_pathology = std::move(gold);
    }
    return s;
}

std::vector<TrainSample> prepare_dataset(const data::Dataset& ds) {
    std::vector<TrainSample> out;
    out.reserve(ds.entries.size());
    for (size_t i = 0; i < ds.entries.size(); ++i) out.push_back(prepare_sample(ds.load(i)));
    return out;
}

namespace {

template <typename T>
Array2D<T> flip_array(const Array2D<T>& a, bool fr, bool fc) {
    Array2D<T> out(a.rows(), a.cols());
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c)
            out(fr ? a.rows() - 1 - r : r, fc ? a.cols() - 1 - c : c) = a(r, c);
    return out;
}

nn::Tensor flip_tensor(const nn::Tensor& t, bool fr, bool fc) {
    nn::Tensor out(t.c, t.h, t.w);
    for (int ci = 0; ci < t.c; ++ci)
        for (int r = 0; r < t.h; ++r)
            for (int c = 0; c < t.w; ++c)
                out.at(ci, fr ? t.h - 1 - r : r, fc ? t.w - 1 - c : c) = t.at(ci, r, c);
    return out;
}

} // namespace

TrainSample flip_sample(const TrainSample& s, bool flip_rows, bool flip_cols) {
    if (!flip_rows && !flip_cols) return s;
    TrainSample out = s;
    for (auto& [seq, img] : out.images) img = flip_tensor(img, flip_rows, flip_cols);
    for (auto& [seq, t] : out.anatomy_tensor) t = flip_tensor(t, flip_rows, flip_cols);
    for (auto& [seq, oh] : out.anatomy)
        for (auto& chan : oh) chan = flip_array(chan, flip_rows, flip_cols);
    for (auto& [seq, m] : out.myo) m = flip_array(m, flip_rows, flip_cols);
    for (auto& [seq, l] : out.labels) l = flip_array(l, flip_rows, flip_cols);
    if (out.gold_pathology) out.gold_pathology = flip_array(*out.gold_pathology, flip_rows, flip_cols);
    return out;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Var>& params) {
    ++t_;
    const double corr1 = 1.0 - std::pow(b1_, t_);
    const double corr2 = 1.0 - std::pow(b2_, t_);
    for (const auto& p : params) {
        if (p->frozen || !p->grad.same_shape(p->val)) continue;
        auto& [m, v] = state_[p->name];
        if (m.size() != p->val.size()) {
            m.assign(p->val.size(), 0.0f);
            v.assign(p->val.size(), 0.0f);
        }
        for (size_t i = 0; i < p->val.size(); ++i) {
            const double g = p->grad.v[i];
            m[i] = static_cast<float>(b1_ * m[i] + (1.0 - b1_) * g);
            v[i] = static_cast<float>(b2_ * v[i] + (1.0 - b2_) * g * g);
            const double mh = m[i] / corr1;
            const double vh = v[i] / corr2;
            p->val.v[i] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
        }
    }
}

namespace {

struct Stage1Graph {
    Var reg, cons, myo, hybrid;
};

Stage1Graph stage1_forward(nn::UMyoPSNet& net, const TrainSample& s,
                           const losses::LossConfig& lc) {
    const Var img_b = nn::constant(s.images.at(kSeqBssfp));
    const Var img_l = nn::constant(s.images.at(kSeqLge));
    const Var img_t = nn::constant(s.images.at(kSeqT2));

    const auto fb = net.encode("E_bSSFP", img_b, 1);
    const auto fl = net.encode("E_LGE", img_l, 1);
    const auto ft = net.encode("E_T2", img_t, 1);
    const Var delta_b = net.reg_head("R_bSSFP", fb, fl);
    const Var delta_t = net.reg_head("R_T2", ft, fl);

    std::map<std::string, Var> warped;
    warped[kSeqBssfp] = net.warp_by_delta(nn::constant(s.anatomy_tensor.at(kSeqBssfp)), delta_b);
    warped[kSeqT2] = net.warp_by_delta(nn::constant(s.anatomy_tensor.at(kSeqT2)), delta_t);

    Stage1Graph g;
    g.reg = losses::loss_reg(warped, s.anatomy.at(kSeqLge), lc.smooth_eps);

    const Var myo_lge = net.decode_myo_msf(fl, fb, ft, delta_b, delta_t);
    g.myo = losses::loss_myo(myo_lge, s.myo.at(kSeqLge), lc.smooth_eps);

    std::map<std::string, Var> cons_pred{{kSeqBssfp, net.decode_myo_plain("D_bSSFP", fb)},
                                         {kSeqT2, net.decode_myo_plain("D_T2", ft)}};
    std::map<std::string, ImageD> cons_gold{{kSeqBssfp, s.myo.at(kSeqBssfp)},
                                            {kSeqT2, s.myo.at(kSeqT2)}};
    g.cons = losses::loss_cons(cons_pred, cons_gold, lc.smooth_eps);
    g.hybrid = losses::loss_hybrid(g.reg, g.cons, g.myo, lc);
    return g;
}

double validation_stage1(nn::UMyoPSNet& net, const std::vector<TrainSample>& val,
                         const losses::LossConfig& lc) {
    double total = 0.0;
    for (const auto& s : val) total += stage1_forward(net, s, lc).hybrid->scalar();
    return total / static_cast<double>(val.size());
}

std::map<std::string, nn::Tensor> snapshot(const nn::ParamStore& ps) {
    std::map<std::string, nn::Tensor> out;
    for (const auto& [name, p] : ps.all()) out[name] = p->val;
    return out;
}

void restore(nn::ParamStore& ps, const std::map<std::string, nn::Tensor>& snap) {
    for (const auto& [name, p] : ps.all()) {
        const auto it = snap.find(name);
        if (it != snap.end()) p->val = it->second;
    }
}

class TrainLog {
public:
    explicit TrainLog(const std::string& path) {
        if (path.empty()) return;
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        const bool fresh = !std::filesystem::exists(path);
        out_.open(path, std::ios::app);
        if (!out_) throw IoError("TrainLog: cannot open " + path);
        if (fresh)
            out_ << "# schema: umyops-trainlog-v1\n"
                    "step,stage,loss_reg,loss_cons,loss_myo,loss_pathology,total,val_total\n";
    }
    void row(int step, int stage, const std::string& reg, const std::string& cons,
             const std::string& myo, const std::string& path, double total,
             const std::string& val) {
        if (!out_.is_open()) return;
        out_ << step << ',' << stage << ',' << reg << ',' << cons << ',' << myo << ',' << path
             << ',' << total << ',' << val << '\n';
    }
    void flush() {
        if (out_.is_open()) out_.flush();
    }

private:
    std::ofstream out_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

TrainResult train_stage1(nn::UMyoPSNet& net, const std::vector<TrainSample>& train,
                         const std::vector<TrainSample>& val, const TrainConfig& cfg,
                         const std::string& log_csv) {
    cfg.validate();
    if (train.empty() || val.empty()) throw InvalidArgument("train_stage1: empty dataset");
    for (const auto& s : train)
        if (s.anatomy.count(kSeqBssfp) + s.anatomy.count(kSeqLge) + s.anatomy.count(kSeqT2) != 3)
            throw InvalidArgument("train_stage1: anatomy labels required for all sequences");

    losses::LossConfig lc;
    lc.lambda_balance = cfg.lambda_balance;
    lc.smooth_eps = cfg.smooth_eps;

    Adam adam(cfg.learning_rate);
    Rng rng(cfg.seed ^ 0x5137ULL);
    TrainLog log(log_csv);

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    auto best_params = snapshot(net.params);
    int evals_since_best = 0;

    for (int step = 1; step <= cfg.max_steps; ++step) {
        net.params.zero_grads();
        double breg = 0, bcons = 0, bmyo = 0, btotal = 0;
        bool bad = false;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& drawn = train[rng.uniform_int(static_cast<uint32_t>(train.size()))];
            TrainSample flipped;
            const TrainSample* s = &drawn;
            if (cfg.augment_flips) {
                const bool fr = rng.uniform() < 0.5, fc = rng.uniform() < 0.5;
                if (fr || fc) {
                    flipped = flip_sample(drawn, fr, fc);
                    s = &flipped;
                }
            }
            const auto g = stage1_forward(net, *s, lc);
            const Var scaled = nn::scale(g.hybrid, 1.0f / cfg.batch_size);
            (void)s;
            if (!std::isfinite(scaled->scalar())) {
                bad = true;
                break;
            }
            nn::backward(scaled);
            breg += g.reg->scalar();
            bcons += g.cons->scalar();
            bmyo += g.myo->scalar();
            btotal += g.hybrid->scalar();
        }
        if (bad) {
            restore(net.params, best_params);
            result.aborted_nan = true;
            break;
        }
        adam.step(net.params.trainable());
        result.steps_run = step;

        std::string val_s;
        if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
            const double vloss = validation_stage1(net, val, lc);
            val_s = fmt(vloss);
            if (vloss < best_val - 1e-6) {
                best_val = vloss;
                best_params = snapshot(net.params);
                evals_since_best = 0;
            } else if (++evals_since_best >= cfg.convergence_patience) {
                log.row(step, 1, fmt(breg / cfg.batch_size), fmt(bcons / cfg.batch_size),
                        fmt(bmyo / cfg.batch_size), "", btotal / cfg.batch_size, val_s);
                break;
            }
        }
        log.row(step, 1, fmt(breg / cfg.batch_size), fmt(bcons / cfg.batch_size),
                fmt(bmyo / cfg.batch_size), "", btotal / cfg.batch_size, val_s);
    }
    log.flush();

    if (std::isfinite(best_val)) restore(net.params, best_params);
    result.best_val_loss = std::isfinite(best_val) ? best_val : 0.0;

    if (!cfg.checkpoint_dir.empty()) {
        const std::string dir = cfg.checkpoint_dir + "/stage1";
        json manifest;
        manifest["stage"] = 1;
        manifest["train_config"] = cfg.to_json();
        manifest["best_val_loss"] = result.best_val_loss;
        manifest["steps_run"] = result.steps_run;
        manifest["aborted_nan"] = result.aborted_nan;
        nn::save_checkpoint(dir, net, manifest);
        result.checkpoint_dir = dir;
    }
    return result;
}

AlignedProducts run_stage1_products(nn::UMyoPSNet& net, const TrainSample& sample) {
    const Var img_b = nn::constant(sample.images.at(kSeqBssfp));
    const Var img_l = nn::constant(sample.images.at(kSeqLge));
    const Var img_t = nn::constant(sample.images.at(kSeqT2));
    const auto fb = net.encode("E_bSSFP", img_b, 1);
    const auto fl = net.encode("E_LGE", img_l, 1);
    const auto ft = net.encode("E_T2", img_t, 1);
    const Var delta_b = net.reg_head("R_bSSFP", fb, fl);
    const Var delta_t = net.reg_head("R_T2", ft, fl);

    AlignedProducts out;
    out.deltas_canonical_bssfp = delta_b->val;
    out.deltas_canonical_t2 = delta_t->val;
    const Var myo = net.decode_myo_msf(fl, fb, ft, delta_b, delta_t);
    out.myo_prob_lge = nn::to_image(myo->val);

    const Var wb = net.warp_by_delta(img_b, delta_b);
    const Var wt = net.warp_by_delta(img_t, delta_t);
    out.aligned3 = nn::concat({wb, img_l, wt})->val;
    out.warped_images[kSeqBssfp] = nn::to_image(wb->val);
    out.warped_images[kSeqLge] = nn::to_image(img_l->val);
    out.warped_images[kSeqT2] = nn::to_image(wt->val);
    return out;
}

tps::DisplacementSet deltas_to_set(const nn::Tensor& deltas, double frame_extent) {
    const int n = static_cast<int>(deltas.size()) / 2;
    tps::DisplacementSet d;
    d.frame_h = d.frame_w = frame_extent;
    d.deltas.reserve(n);
    for (int i = 0; i < n; ++i)
        d.deltas.push_back({static_cast<double>(deltas.v[i]), static_cast<double>(deltas.v[n + i])});
    return d;
}

data::LabelMask resolve_pathology_gold(nn::UMyoPSNet& net, const TrainSample& sample) {
    if (sample.gold_pathology) return *sample.gold_pathology;
    const auto it_lge = sample.labels.find(kSeqLge);
    const auto it_t2 = sample.labels.find(kSeqT2);
    if (it_lge == sample.labels.end() || it_t2 == sample.labels.end())
        throw InvalidArgument("resolve_pathology_gold: needs LGE and T2 labels");

    const auto products = run_stage1_products(net, sample);
    const int size = sample.size;
    const double s = size / net.cfg.canonical_extent;
    const auto grid = tps::scale_control_grid(
        tps::make_control_grid(net.cfg.grid_m, net.cfg.canonical_extent), s, s);
    auto disp = deltas_to_set(products.deltas_canonical_t2, net.cfg.canonical_extent);
    disp = tps::rescale_displacements(disp, net.cfg.canonical_extent, net.cfg.canonical_extent,
                                      size, size);
    const auto warped_t2 = tps::warp_label_nearest(it_t2->second, tps::solve_tps(grid, disp));
    return data::merge_pathology_labels(it_lge->second, warped_t2);
}

TrainResult train_stage2(nn::UMyoPSNet& net, const std::vector<TrainSample>& train,
                         const std::vector<TrainSample>& val, const TrainConfig& cfg,
                         const std::string& log_csv) {
    cfg.validate();
    if (train.empty() || val.empty()) throw InvalidArgument("train_stage2: empty dataset");

    for (const auto& prefix : stage1_prefixes()) net.params.freeze_prefix(prefix);
    std::vector<uint64_t> frozen_digests;
    for (const auto& prefix : stage1_prefixes())
        frozen_digests.push_back(net.params.digest_prefix(prefix));

    // stage-1 products are fixed once the backbone is frozen
    struct Prepared {
        nn::Tensor aligned3;
        nn::Tensor prior;           // (1,S,S)
        data::LabelMask gold;
    };
    auto prepare = [&](const std::vector<TrainSample>& samples) {
        std::vector<Prepared> out(samples.size());
        std::vector<ImageD> priors(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) {
            const auto prod = run_stage1_products(net, samples[i]);
            out[i].aligned3 = prod.aligned3;
            priors[i] = prod.myo_prob_lge;
            out[i].gold = resolve_pathology_gold(net, samples[i]);
        }
        for (size_t i = 0; i < samples.size(); ++i) {
            switch (cfg.prior_mode) {
                case TrainConfig::PriorMode::True: out[i].prior = nn::from_image(priors[i]); break;
                case TrainConfig::PriorMode::Uniform:
                    out[i].prior = nn::Tensor(1, samples[i].size, samples[i].size, 1.0f);
                    break;
                case TrainConfig::PriorMode::Shuffled:
                    out[i].prior = nn::from_image(priors[(i + 1) % samples.size()]);
                    break;
            }
        }
        return out;
    };
    const auto train_prep = prepare(train);
    const auto val_prep = prepare(val);

    Adam adam(cfg.learning_rate);
    Rng rng(cfg.seed ^ 0xA5A5ULL);
    TrainLog log(log_csv);

    auto path_loss = [&](const Prepared& p) {
        const Var logits = net.pathology_logits(nn::constant(p.aligned3), nn::constant(p.prior));
        return losses::loss_pathology(logits, p.gold, cfg.smooth_eps);
    };

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    auto best_params = snapshot(net.params);
    int evals_since_best = 0;

    for (int step = 1; step <= cfg.max_steps; ++step) {
        net.params.zero_grads();
        double btotal = 0;
        bool bad = false;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& p = train_prep[rng.uniform_int(static_cast<uint32_t>(train_prep.size()))];
            const Var loss = path_loss(p);
            if (!std::isfinite(loss->scalar())) {
                bad = true;
                break;
            }
            nn::backward(nn::scale(loss, 1.0f / cfg.batch_size));
            btotal += loss->scalar();
        }
        if (bad) {
            restore(net.params, best_params);
            result.aborted_nan = true;
            break;
        }
        adam.step(net.params.trainable());
        result.steps_run = step;

        std::string val_s;
        if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
            double vloss = 0.0;
            for (const auto& p : val_prep) vloss += path_loss(p)->scalar();
            vloss /= static_cast<double>(val_prep.size());
            val_s = fmt(vloss);
            if (vloss < best_val - 1e-6) {
                best_val = vloss;
                best_params = snapshot(net.params);
                evals_since_best = 0;
            } else if (++evals_since_best >= cfg.convergence_patience) {
                log.row(step, 2, "", "", "", fmt(btotal / cfg.batch_size),
                        btotal / cfg.batch_size, val_s);
                break;
            }
        }
        log.row(step, 2, "", "", "", fmt(btotal / cfg.batch_size), btotal / cfg.batch_size, val_s);
    }
    log.flush();

    if (std::isfinite(best_val)) restore(net.params, best_params);
    result.best_val_loss = std::isfinite(best_val) ? best_val : 0.0;

    // freezing contract: stage-1 parameters are bit-identical
    for (size_t i = 0; i < stage1_prefixes().size(); ++i)
        if (net.params.digest_prefix(stage1_prefixes()[i]) != frozen_digests[i])
            throw NumericError("train_stage2: frozen parameters were modified");

    if (!cfg.checkpoint_dir.empty()) {
        const std::string dir = cfg.checkpoint_dir + "/stage2";
        json manifest;
        manifest["stage"] = 2;
        manifest["train_config"] = cfg.to_json();
        manifest["best_val_loss"] = result.best_val_loss;
        manifest["steps_run"] = result.steps_run;
        manifest["aborted_nan"] = result.aborted_nan;
        nn::save_checkpoint(dir, net, manifest);
        result.checkpoint_dir = dir;
    }
    return result;
}

nn::ForwardOutputs infer_slice(nn::UMyoPSNet& net, const data::MultiSeqSlice& slice) {
    const TrainSample sample = prepare_sample(slice);
    const Var img_b = nn::constant(sample.images.at(kSeqBssfp));
    const Var img_l = nn::constant(sample.images.at(kSeqLge));
    const Var img_t = nn::constant(sample.images.at(kSeqT2));
    const auto fb = net.encode("E_bSSFP", img_b, 1);
    const auto fl = net.encode("E_LGE", img_l, 1);
    const auto ft = net.encode("E_T2", img_t, 1);
    const Var delta_b = net.reg_head("R_bSSFP", fb, fl);
    const Var delta_t = net.reg_head("R_T2", ft, fl);

    nn::ForwardOutputs out;
    out.disp[kSeqBssfp] = deltas_to_set(delta_b->val, net.cfg.canonical_extent);
    out.disp[kSeqT2] = deltas_to_set(delta_t->val, net.cfg.canonical_extent);

    const Var myo_lge = net.decode_myo_msf(fl, fb, ft, delta_b, delta_t);
    out.myo_prob[kSeqLge] = nn::to_image(myo_lge->val);
    out.myo_prob[kSeqBssfp] = nn::to_image(net.decode_myo_plain("D_bSSFP", fb)->val);
    out.myo_prob[kSeqT2] = nn::to_image(net.decode_myo_plain("D_T2", ft)->val);

    const Var wb = net.warp_by_delta(img_b, delta_b);
    const Var wt = net.warp_by_delta(img_t, delta_t);
    out.warped_images[kSeqBssfp] = nn::to_image(wb->val);
    out.warped_images[kSeqLge] = nn::to_image(img_l->val);
    out.warped_images[kSeqT2] = nn::to_image(wt->val);

    const Var aligned = nn::concat({wb, img_l, wt});
    const Var logits = net.pathology_logits(aligned, nn::detach(myo_lge));
    out.pathology_logits = logits->val;
    return out;
}

data::LabelMask compose_final_mask(const nn::ForwardOutputs& out, double myo_threshold) {
    const ImageD& myo = out.myo_prob.at(kSeqLge);
    const nn::Tensor probs = nn::softmax_infer(out.pathology_logits);
    data::LabelMask mask(myo.rows(), myo.cols(), data::BG);
    const size_t plane = probs.plane();
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            const size_t i = static_cast<size_t>(r) * mask.cols() + c;
            if (myo(r, c) > myo_threshold) mask(r, c) = data::MYO;
            int arg = 0;
            float best = probs.v[i];
            for (int k = 1; k < nn::kPathologyClasses; ++k)
                if (probs.v[k * plane + i] > best) {
                    best = probs.v[k * plane + i];
                    arg = k;
                }
            if (arg == nn::kClassEdema) mask(r, c) = data::EDEMA;
            if (arg == nn::kClassScar) mask(r, c) = data::SCAR;  // scar wins
        }
    }
    return mask;
}

} // namespace umyops::train

// umyops - phantom generation, two-stage training, inference, evaluation,
// and clinical quantification for multi-sequence CMR slices.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "umyops/data/container.hpp"
#include "umyops/metrics/metrics.hpp"
#include "umyops/quant/plots.hpp"
#include "umyops/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace umyops;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "umyops 1.0.0";

// Exit-code contract: 0 success, 2 usage/schema, 3 numeric failure.
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mu;
    std::exception_ptr first_error;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

json run_manifest(const std::string& command, const json& config, uint64_t seed,
                  const std::vector<std::string>& inputs, const std::string& output,
                  double wall_seconds) {
    json m;
    m["schema"] = "umyops-run-v1";
    m["command"] = command;
    m["tool_version"] = kVersion;
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["output"] = output;
    m["wall_seconds"] = wall_seconds;
    m["config_hash"] = std::hash<std::string>{}(config.dump());
    m["config"] = config;
    return m;
}

std::string data_root_default() {
    const char* env = std::getenv("UMYOPS_DATA_ROOT");
    return env ? env : "";
}

MaskU8 mask_from_prob(const ImageD& prob, double thr = 0.5) {
    MaskU8 m(prob.rows(), prob.cols(), 0);
    for (size_t i = 0; i < prob.size(); ++i) m.raw()[i] = prob.raw()[i] > thr ? 1 : 0;
    return m;
}

// ---- phantom ---------------------------------------------------------------

int cmd_phantom(const std::string& out_dir, int count, uint64_t seed, int size,
                double misalign, double scar_frac, double edema_frac, double noise,
                double spacing, int jobs) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<data::PhantomSample> samples(count);
    std::vector<uint64_t> seeds(count);
    parallel_for(static_cast<size_t>(count), jobs, [&](size_t i) {
        data::PhantomSpec spec;
        spec.seed = seed + i;
        spec.size = size;
        spec.misalign_magnitude = misalign;
        spec.scar_fraction = scar_frac;
        spec.edema_fraction = edema_frac;
        spec.noise_sigma = noise;
        spec.spacing_mm = spacing;
        samples[i] = data::generate_phantom(spec);
        seeds[i] = spec.seed;
    });

    json spec_json{{"count", count},       {"seed", seed},
                   {"size", size},         {"misalign", misalign},
                   {"scar_frac", scar_frac}, {"edema_frac", edema_frac},
                   {"noise", noise},       {"spacing", spacing}};
    data::write_dataset(out_dir, samples, seeds, {{"spec", spec_json}});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(out_dir + "/run.json",
               run_manifest("phantom", spec_json, seed, {}, out_dir, secs));
    std::cout << "wrote " << count << " phantom samples to " << out_dir << "\n";
    return 0;
}

// ---- ingest -----------------------------------------------------------------

int cmd_ingest(const std::string& bssfp, const std::string& lge, const std::string& t2,
               const std::string& bssfp_labels, const std::string& lge_labels,
               const std::string& t2_labels, const std::string& out_dir, int target_size,
               double target_spacing) {
    const auto t0 = std::chrono::steady_clock::now();
    auto load = [](const std::string& img_path, const std::string& lbl_path,
                   const char* seq) {
        auto vol = data::read_nifti(img_path, seq);
        if (!lbl_path.empty()) {
            const auto lbl = data::read_nifti(lbl_path, seq);
            if (lbl.nx != vol.nx || lbl.ny != vol.ny || lbl.nz != vol.nz)
                throw IoError("label volume shape mismatch for " + img_path);
            std::vector<uint8_t> codes(lbl.voxels.size());
            for (size_t i = 0; i < codes.size(); ++i)
                codes[i] = static_cast<uint8_t>(std::lround(lbl.voxels[i]));
            vol.labels = std::move(codes);
        }
        return vol;
    };
    std::vector<data::SequenceVolume> vols;
    vols.push_back(load(bssfp, bssfp_labels, data::kSeqBssfp));
    vols.push_back(load(lge, lge_labels, data::kSeqLge));
    vols.push_back(load(t2, t2_labels, data::kSeqT2));

    const auto aligned = data::rigid_prealign(vols);
    const auto slices = data::pair_slices(aligned);

    fs::create_directories(out_dir);
    json list = json::array();
    for (size_t i = 0; i < slices.size(); ++i) {
        const auto prepared = data::crop_resample_normalize(slices[i], target_size, target_spacing);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04zu", i);
        data::write_slice(out_dir + std::string("/") + name, prepared);
        json entry;
        entry["dir"] = name;
        entry["seed"] = 0;
        list.push_back(std::move(entry));
    }
    json manifest;
    manifest["schema"] = "umyops-dataset-v1";
    manifest["extra"] = {{"source", json::array({bssfp, lge, t2})}};
    manifest["samples"] = std::move(list);
    write_json(out_dir + "/manifest.json", manifest);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(out_dir + "/run.json",
               run_manifest("ingest", {{"target_size", target_size}}, 0, {bssfp, lge, t2},
                            out_dir, secs));
    std::cout << "ingested " << slices.size() << " paired slices to " << out_dir << "\n";
    return 0;
}

// ---- train ------------------------------------------------------------------

struct SplitData {
    std::vector<train::TrainSample> train, val;
};

SplitData load_split(const std::string& data_dir, double val_fraction) {
    const auto ds = data::read_dataset(data_dir);
    auto all = train::prepare_dataset(ds);
    const size_t n_val = std::max<size_t>(1, static_cast<size_t>(all.size() * val_fraction));
    if (all.size() < n_val + 1) throw InvalidArgument("dataset too small to split");
    SplitData out;
    // deterministic split: the tail of the manifest order is validation
    out.train.assign(all.begin(), all.end() - n_val);
    out.val.assign(all.end() - n_val, all.end());
    return out;
}

int cmd_train(int stage, const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path, const std::string& from_stage1,
              train::TrainConfig cfg, double val_fraction, int image_size,
              const std::string& log_csv, const std::string& prior_mode) {
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot open config " + config_path);
        json j;
        in >> j;
        cfg = train::TrainConfig::from_json(j);
    }
    cfg.stage = stage;
    cfg.checkpoint_dir = out_dir;
    if (prior_mode == "uniform")
        cfg.prior_mode = train::TrainConfig::PriorMode::Uniform;
    else if (prior_mode == "shuffled")
        cfg.prior_mode = train::TrainConfig::PriorMode::Shuffled;
    cfg.validate();

    const auto split = load_split(data_dir, val_fraction);
    const auto t0 = std::chrono::steady_clock::now();

    std::unique_ptr<nn::UMyoPSNet> net;
    if (stage == 2) {
        if (from_stage1.empty())
            throw InvalidArgument("stage 2 requires --from-stage1 <checkpoint dir>");
        net = nn::load_checkpoint(from_stage1);
    } else {
        nn::NetConfig ncfg;
        ncfg.image_size = image_size > 0 ? image_size : split.train.front().size;
        ncfg.init_seed = cfg.seed + 1;
        net = std::make_unique<nn::UMyoPSNet>(ncfg);
    }

    const std::string log = log_csv.empty() ? out_dir + "/train_log.csv" : log_csv;
    fs::create_directories(out_dir);
    const train::TrainResult res =
        stage == 1 ? train::train_stage1(*net, split.train, split.val, cfg, log)
                   : train::train_stage2(*net, split.train, split.val, cfg, log);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(out_dir + "/run.json", run_manifest("train", cfg.to_json(), cfg.seed,
                                                   {data_dir, from_stage1}, out_dir, secs));
    std::cout << "stage " << stage << ": " << res.steps_run
              << " steps, best validation loss " << res.best_val_loss << "\n";
    if (res.aborted_nan) {
        std::cerr << "training aborted on non-finite loss; last good parameters kept\n";
        return kExitNumeric;
    }
    return 0;
}

// ---- infer -------------------------------------------------------------------

int cmd_infer(const std::string& ckpt_dir, const std::string& data_dir,
              const std::string& out_dir, int jobs) {
    auto net = nn::load_checkpoint(ckpt_dir);
    const auto ds = data::read_dataset(data_dir);
    fs::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<json> rows(ds.entries.size());
    // each worker gets its own net replica (stateless weights, private caches)
    const int effective_jobs = std::max(1, jobs);
    std::vector<std::unique_ptr<nn::UMyoPSNet>> nets;
    nets.push_back(std::move(net));
    for (int t = 1; t < effective_jobs; ++t) nets.push_back(nn::load_checkpoint(ckpt_dir));
    std::atomic<int> worker_id{0};

    parallel_for(ds.entries.size(), effective_jobs, [&](size_t i) {
        thread_local int wid = -1;
        if (wid < 0) wid = worker_id.fetch_add(1) % effective_jobs;
        const auto slice = ds.load(i);
        const auto out = train::infer_slice(*nets[wid], slice);
        const auto mask = train::compose_final_mask(out);

        const std::string sdir = out_dir + "/" + ds.entries[i].dir;
        fs::create_directories(sdir);
        data::write_bytes(sdir + "/final_mask.raw", mask.raw());
        std::vector<float> myo(out.myo_prob.at(data::kSeqLge).size());
        for (size_t k = 0; k < myo.size(); ++k)
            myo[k] = static_cast<float>(out.myo_prob.at(data::kSeqLge).raw()[k]);
        data::write_floats(sdir + "/myo_prob.raw", myo);
        for (const auto& [seq, img] : out.warped_images) {
            std::vector<float> buf(img.size());
            for (size_t k = 0; k < buf.size(); ++k) buf[k] = static_cast<float>(img.raw()[k]);
            data::write_floats(sdir + "/warped_" + seq + ".raw", buf);
        }
        json row;
        row["dir"] = ds.entries[i].dir;
        row["h"] = mask.rows();
        row["w"] = mask.cols();
        for (const auto& [seq, d] : out.disp)
            row["disp"][seq] = data::displacement_to_json(d);
        rows[i] = std::move(row);
    });

    json manifest;
    manifest["schema"] = "umyops-inference-v1";
    manifest["checkpoint"] = ckpt_dir;
    manifest["samples"] = rows;
    write_json(out_dir + "/inference.json", manifest);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(out_dir + "/run.json",
               run_manifest("infer", {{"checkpoint", ckpt_dir}}, 0, {data_dir}, out_dir, secs));
    std::cout << "inferred " << ds.entries.size() << " samples to " << out_dir << "\n";
    return 0;
}

// ---- evaluate ------------------------------------------------------------------

data::LabelMask load_pred_mask(const std::string& dir, int h, int w) {
    const auto buf = data::read_bytes(dir + "/final_mask.raw", static_cast<size_t>(h) * w);
    data::LabelMask m(h, w);
    m.raw() = buf;
    return m;
}

int cmd_evaluate(const std::string& data_dir, const std::string& pred_dir,
                 const std::string& out_dir, int jobs) {
    const auto ds = data::read_dataset(data_dir);
    fs::create_directories(out_dir);

    metrics::ReportTable seg("umyops-eval-seg-v1",
                             {"scar_dice", "scar_sen", "scar_pre", "scar_hd_mm", "edema_dice",
                              "edema_sen", "edema_pre", "edema_hd_mm", "myo_dice"});
    metrics::ReportTable reg("umyops-eval-reg-v1",
                             {"bssfp_dice_initial", "bssfp_dice", "bssfp_hd_mm",
                              "t2_dice_initial", "t2_dice", "t2_hd_mm"});

    std::vector<std::vector<std::optional<double>>> seg_rows(ds.entries.size()),
        reg_rows(ds.entries.size());
    std::vector<tps::DisplacementSet> all_disp;
    std::mutex disp_mu;

    parallel_for(ds.entries.size(), jobs, [&](size_t i) {
        const auto slice = ds.load(i);
        const std::string pdir = pred_dir + "/" + ds.entries[i].dir;
        const auto pred = load_pred_mask(pdir, slice.h, slice.w);
        if (!slice.gold_common)
            throw IoError("evaluate: dataset sample lacks common-space gold labels");

        // scar-wins gold, edema evaluated as the union of scar and edema
        const auto gold = *slice.gold_common;
        const auto gold_union = data::edema_union_for_eval(gold);
        const auto pred_union = data::edema_union_for_eval(pred);

        const auto scar_p = data::binary_of(pred, data::SCAR);
        const auto scar_g = data::binary_of(gold, data::SCAR);
        const auto ede_p = data::binary_of(pred_union, data::EDEMA);
        const auto ede_g = data::binary_of(gold_union, data::EDEMA);

        auto hd_opt = [&](const MaskU8& a, const MaskU8& b) -> std::optional<double> {
            try {
                return metrics::hausdorff_mm(a, b, slice.spacing);
            } catch (const metrics::UndefinedMetric&) {
                return std::nullopt;
            }
        };
        const auto sp_scar = metrics::sensitivity_precision(scar_p, scar_g);
        const auto sp_ede = metrics::sensitivity_precision(ede_p, ede_g);

        std::optional<double> myo_dice;
        if (slice.labels.count(slice.cri)) {
            const auto gold_myo =
                data::binary_any(slice.labels.at(slice.cri), {data::MYO, data::SCAR, data::EDEMA});
            const auto pred_myo =
                data::binary_any(pred, {data::MYO, data::SCAR, data::EDEMA});
            myo_dice = metrics::dice_hard(pred_myo, gold_myo);
        }

        seg_rows[i] = {metrics::dice_hard(scar_p, scar_g),
                       sp_scar.sen,
                       sp_scar.pre,
                       hd_opt(scar_p, scar_g),
                       metrics::dice_hard(ede_p, ede_g),
                       sp_ede.sen,
                       sp_ede.pre,
                       hd_opt(ede_p, ede_g),
                       myo_dice};

        // registration: warped source anatomy vs CRI anatomy
        std::vector<std::optional<double>> rrow(6);
        std::ifstream inf(pred_dir + "/inference.json");
        if (inf) {
            json ij;
            inf >> ij;
            for (const auto& row : ij.at("samples")) {
                if (row.at("dir") != ds.entries[i].dir) continue;
                const auto gold_myo_cri = data::binary_any(
                    slice.labels.at(slice.cri), {data::MYO, data::SCAR, data::EDEMA});
                int col = 0;
                for (const std::string seq : {data::kSeqBssfp, data::kSeqT2}) {
                    if (!slice.labels.count(seq) || !row.contains("disp")) {
                        col += 3;
                        continue;
                    }
                    const auto src_myo = data::binary_any(
                        slice.labels.at(seq), {data::MYO, data::SCAR, data::EDEMA});
                    auto d = data::displacement_from_json(row.at("disp").at(seq));
                    const double sc = slice.h / d.frame_h;
                    auto dr = tps::rescale_displacements(d, d.frame_h, d.frame_w, slice.h, slice.w);
                    const auto grid = tps::scale_control_grid(
                        tps::make_control_grid(4, d.frame_h), sc, sc);
                    const auto warped =
                        tps::warp_label_nearest(src_myo, tps::solve_tps(grid, dr));
                    const auto score = metrics::eval_registration(warped, gold_myo_cri, slice.spacing);
                    rrow[col + 0] = metrics::dice_hard(src_myo, gold_myo_cri);
                    rrow[col + 1] = score.dice;
                    rrow[col + 2] = score.hd_mm;
                    col += 3;
                    std::lock_guard<std::mutex> lk(disp_mu);
                    all_disp.push_back(d);
                }
            }
        }
        reg_rows[i] = std::move(rrow);
    });

    for (size_t i = 0; i < ds.entries.size(); ++i) {
        seg.add_row(ds.entries[i].dir, seg_rows[i]);
        if (!reg_rows[i].empty()) reg.add_row(ds.entries[i].dir, reg_rows[i]);
    }
    seg.write_csv(out_dir + "/eval_seg.csv");
    reg.write_csv(out_dir + "/eval_reg.csv");
    json out;
    out["segmentation"] = seg.to_json();
    out["registration"] = reg.to_json();
    if (!all_disp.empty()) {
        const auto st =
            metrics::displacement_stats(all_disp, all_disp[0].frame_h, all_disp[0].frame_w);
        out["displacement_norms"] = {{"median", st.median},
                                     {"q1", st.q1},
                                     {"q3", st.q3},
                                     {"max", st.max},
                                     {"count", st.count}};
    }
    write_json(out_dir + "/eval.json", out);
    std::cout << "evaluation written to " << out_dir << "\n";
    return 0;
}

// ---- quantify --------------------------------------------------------------------

int cmd_quantify(const std::string& data_dir, const std::string& pred_dir,
                 const std::string& out_dir, int jobs) {
    const auto ds = data::read_dataset(data_dir);
    fs::create_directories(out_dir);

    metrics::ReportTable table(
        "umyops-quant-v1",
        {"scar_size_pct", "edema_size_pct", "transmural_chords", "gold_scar_size_pct",
         "gold_edema_size_pct", "gold_transmural_chords", "sd1_scar_size_pct",
         "sd2_scar_size_pct", "sd3_scar_size_pct"});

    std::vector<std::vector<std::optional<double>>> rows(ds.entries.size());
    parallel_for(ds.entries.size(), jobs, [&](size_t i) {
        const auto slice = ds.load(i);
        const std::string pdir = pred_dir + "/" + ds.entries[i].dir;
        const auto pred = load_pred_mask(pdir, slice.h, slice.w);
        if (!slice.labels.count(slice.cri) || !slice.gold_common)
            throw IoError("quantify: dataset sample lacks labels");
        const auto& cri_labels = slice.labels.at(slice.cri);
        const auto lv = data::binary_of(cri_labels, data::LV);

        const auto rep = quant::quantify_slice(pred, lv);

        // gold-side quantification on the common-space labels + CRI anatomy
        data::LabelMask gold_full = cri_labels;
        for (size_t k = 0; k < gold_full.size(); ++k) {
            const uint8_t g = slice.gold_common->raw()[k];
            if (g == data::SCAR || g == data::EDEMA) gold_full.raw()[k] = g;
        }
        const auto gold_rep = quant::quantify_slice(gold_full, lv);

        // n-SD clinical baselines on the LGE image
        const auto wall = data::binary_any(gold_full, {data::MYO, data::SCAR, data::EDEMA});
        auto chords = quant::build_chords(wall, lv);
        const auto patho = data::binary_any(gold_full, {data::SCAR, data::EDEMA});
        const auto remote = quant::derive_remote(chords, wall, patho);
        std::array<std::optional<double>, 3> sd_sizes;
        for (int n = 1; n <= 3; ++n) {
            try {
                const auto sd = quant::nsd_segment(slice.images.at(slice.cri), wall, remote, n);
                sd_sizes[n - 1] = quant::pathology_size_pct(sd, wall);
            } catch (const InvalidArgument&) {
                sd_sizes[n - 1] = std::nullopt;
            }
        }

        auto pred_chords = quant::build_chords(
            data::binary_any(pred, {data::MYO, data::SCAR, data::EDEMA}), lv);
        quant::fill_transmurality(pred_chords, data::binary_of(pred, data::SCAR));
        quant::write_bullseye_svg(out_dir + "/" + ds.entries[i].dir + "_bullseye.svg",
                                  pred_chords, "transmurality " + ds.entries[i].dir);

        rows[i] = {rep.scar_size_pct,
                   rep.edema_size_pct,
                   static_cast<double>(rep.transmural_count),
                   gold_rep.scar_size_pct,
                   gold_rep.edema_size_pct,
                   static_cast<double>(gold_rep.transmural_count),
                   sd_sizes[0],
                   sd_sizes[1],
                   sd_sizes[2]};
    });

    std::vector<double> pred_sizes, gold_sizes, pred_tm, gold_tm;
    for (size_t i = 0; i < rows.size(); ++i) {
        table.add_row(ds.entries[i].dir, rows[i]);
        pred_sizes.push_back(*rows[i][0]);
        gold_sizes.push_back(*rows[i][3]);
        pred_tm.push_back(*rows[i][2]);
        gold_tm.push_back(*rows[i][5]);
    }
    table.write_csv(out_dir + "/quant.csv");

    json out;
    out["table"] = table.to_json();
    try {
        out["pearson_scar_size"] = quant::pearson_r(gold_sizes, pred_sizes);
    } catch (const metrics::UndefinedMetric&) {
        out["pearson_scar_size"] = nullptr;
    }
    try {
        out["pearson_transmural_chords"] = quant::pearson_r(gold_tm, pred_tm);
    } catch (const metrics::UndefinedMetric&) {
        out["pearson_transmural_chords"] = nullptr;
    }
    write_json(out_dir + "/quant.json", out);

    if (rows.size() >= 3) {
        quant::write_scatter_svg(out_dir + "/corr_scar_size.svg", gold_sizes, pred_sizes,
                                 "manual scar size (%)", "predicted scar size (%)",
                                 "Scar size correlation");
        quant::write_scatter_svg(out_dir + "/corr_transmural.svg", gold_tm, pred_tm,
                                 "manual transmural chords", "predicted transmural chords",
                                 "Transmural chord correlation");
    }
    std::cout << "quantification written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{kVersion};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker threads for per-sample fan-out");

    // phantom
    auto* ph = app.add_subcommand("phantom", "generate a synthetic benchmark dataset");
    std::string ph_out;
    int ph_count = 50, ph_size = 64;
    uint64_t ph_seed = 7;
    double ph_mis = 8.0, ph_scar = 0.15, ph_edema = 0.30, ph_noise = 0.03, ph_spacing = 1.5;
    ph->add_option("--out", ph_out, "output dataset directory")->required();
    ph->add_option("--count", ph_count, "number of samples");
    ph->add_option("--seed", ph_seed, "base seed");
    ph->add_option("--size", ph_size, "square raster size, px");
    ph->add_option("--misalign", ph_mis, "max control-point displacement, px");
    ph->add_option("--scar-frac", ph_scar, "scar fraction of the myocardium");
    ph->add_option("--edema-frac", ph_edema, "edema fraction of the myocardium");
    ph->add_option("--noise", ph_noise, "gaussian noise sigma");
    ph->add_option("--spacing", ph_spacing, "pixel spacing, mm");

    // ingest
    auto* ig = app.add_subcommand("ingest", "pair and preprocess NIfTI volumes");
    std::string ig_b, ig_l, ig_t, ig_bl, ig_ll, ig_tl, ig_out;
    int ig_size = 64;
    double ig_spacing = 1.5;
    ig->add_option("--bssfp", ig_b, "bSSFP volume (.nii)")->required();
    ig->add_option("--lge", ig_l, "LGE volume (.nii)")->required();
    ig->add_option("--t2", ig_t, "T2 volume (.nii)")->required();
    ig->add_option("--bssfp-labels", ig_bl, "bSSFP label volume");
    ig->add_option("--lge-labels", ig_ll, "LGE label volume");
    ig->add_option("--t2-labels", ig_tl, "T2 label volume");
    ig->add_option("--out", ig_out, "output dataset directory")->required();
    ig->add_option("--size", ig_size, "crop raster size, px");
    ig->add_option("--spacing", ig_spacing, "target in-plane spacing, mm");

    // train
    auto* tr = app.add_subcommand("train", "run one optimization stage");
    int tr_stage = 1, tr_size = 0;
    std::string tr_data = data_root_default(), tr_out, tr_config, tr_from1, tr_log, tr_prior = "true";
    train::TrainConfig tcfg;
    double tr_valfrac = 0.2;
    tr->add_option("--stage", tr_stage, "1 or 2")->required();
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "checkpoint output directory")->required();
    tr->add_option("--config", tr_config, "JSON training config (overrides flags)");
    tr->add_option("--from-stage1", tr_from1, "stage-1 checkpoint (required for stage 2)");
    tr->add_option("--seed", tcfg.seed, "training seed");
    tr->add_option("--steps", tcfg.max_steps, "max optimization steps");
    tr->add_option("--batch", tcfg.batch_size, "batch size");
    tr->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
    tr->add_option("--lambda", tcfg.lambda_balance, "hybrid-loss balance coefficient");
    tr->add_option("--patience", tcfg.convergence_patience, "early-stop patience (evals)");
    tr->add_option("--eval-interval", tcfg.eval_interval, "steps between validations");
    tr->add_option("--val-fraction", tr_valfrac, "fraction of samples held for validation");
    tr->add_option("--image-size", tr_size, "network raster (defaults to data size)");
    tr->add_option("--log", tr_log, "training log CSV path");
    tr->add_option("--prior-mode", tr_prior, "stage-2 prior: true|uniform|shuffled");
    tr->add_flag("--augment-flips", tcfg.augment_flips, "random flips during stage 1");

    // infer
    auto* in = app.add_subcommand("infer", "run inference over a dataset");
    std::string in_ckpt, in_data = data_root_default(), in_out;
    in->add_option("--checkpoint", in_ckpt, "trained checkpoint directory")->required();
    in->add_option("--data", in_data, "dataset directory")->required();
    in->add_option("--out", in_out, "output directory")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score predictions against gold labels");
    std::string ev_data = data_root_default(), ev_pred, ev_out;
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--pred", ev_pred, "inference output directory")->required();
    ev->add_option("--out", ev_out, "report directory")->required();

    // quantify
    auto* qu = app.add_subcommand("quantify", "clinical indices and plots");
    std::string qu_data = data_root_default(), qu_pred, qu_out;
    qu->add_option("--data", qu_data, "dataset directory")->required();
    qu->add_option("--pred", qu_pred, "inference output directory")->required();
    qu->add_option("--out", qu_out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*ph)
            return cmd_phantom(ph_out, ph_count, ph_seed, ph_size, ph_mis, ph_scar, ph_edema,
                               ph_noise, ph_spacing, jobs);
        if (*ig)
            return cmd_ingest(ig_b, ig_l, ig_t, ig_bl, ig_ll, ig_tl, ig_out, ig_size, ig_spacing);
        if (*tr)
            return cmd_train(tr_stage, tr_data, tr_out, tr_config, tr_from1, tcfg, tr_valfrac,
                             tr_size, tr_log, tr_prior);
        if (*in) return cmd_infer(in_ckpt, in_data, in_out, jobs);
        if (*ev) return cmd_evaluate(ev_data, ev_pred, ev_out, jobs);
        if (*qu) return cmd_quantify(qu_data, qu_pred, qu_out, jobs);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}

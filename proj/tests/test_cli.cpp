#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "umyops/data/container.hpp"
#include "umyops/metrics/metrics.hpp"
#include "umyops/nn/model.hpp"

using namespace umyops;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(UMYOPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("phantom command: contract, determinism, and usage errors") {
    TmpDir tmp("umyops_cli_phantom");
    const std::string a = (tmp.path / "a").string();
    const std::string b = (tmp.path / "b").string();

    CHECK(run("phantom --out " + a + " --count 4 --seed 7 --misalign 8 --size 32") == 0);
    const auto ds = data::read_dataset(a);
    CHECK(ds.entries.size() == 4);
    CHECK(fs::exists(tmp.path / "a" / "run.json"));
    // ground-truth displacements recorded per non-CRI sequence
    CHECK(ds.entries[0].gt_disp.count("bSSFP") == 1);
    CHECK(ds.entries[0].gt_disp.count("T2") == 1);

    // same seed twice: identical bytes
    CHECK(run("phantom --out " + b + " --count 4 --seed 7 --misalign 8 --size 32") == 0);
    for (const auto& e : ds.entries) {
        CHECK(slurp(tmp.path / "a" / e.dir / "lge.raw") == slurp(tmp.path / "b" / e.dir / "lge.raw"));
        CHECK(slurp(tmp.path / "a" / e.dir / "t2_label.raw") ==
              slurp(tmp.path / "b" / e.dir / "t2_label.raw"));
    }

    // zero misalignment: stored ground truth is identically zero
    const std::string c = (tmp.path / "c").string();
    CHECK(run("phantom --out " + c + " --count 2 --seed 9 --misalign 0 --size 32") == 0);
    const auto ds0 = data::read_dataset(c);
    for (const auto& e : ds0.entries)
        for (const auto& [seq, d] : e.gt_disp)
            for (const auto& [dx, dy] : d.deltas) {
                CHECK(dx == 0.0);
                CHECK(dy == 0.0);
            }

    // invalid spec: exit code 2
    CHECK(run("phantom --out " + (tmp.path / "bad").string() +
              " --count 2 --scar-frac 0.9 --edema-frac 0.2") == 2);
    CHECK(run("definitely-not-a-subcommand") == 2);
}

TEST_CASE("training, inference, evaluation, and quantification round-trip") {
    TmpDir tmp("umyops_cli_e2e");
    const std::string data = (tmp.path / "data").string();
    const std::string ckpt = (tmp.path / "ckpt").string();
    const std::string pred = (tmp.path / "pred").string();

    REQUIRE(run("phantom --out " + data + " --count 6 --seed 11 --misalign 5 --size 32") == 0);

    // stage-1 smoke run: completes, loss finite, log written
    REQUIRE(run("train --stage 1 --data " + data + " --out " + ckpt +
                " --steps 8 --batch 2 --eval-interval 4 --seed 5") == 0);
    CHECK(fs::exists(tmp.path / "ckpt" / "stage1" / "params.bin"));
    CHECK(fs::exists(tmp.path / "ckpt" / "train_log.csv"));

    // stage 2 requires the stage-1 checkpoint
    CHECK(run("train --stage 2 --data " + data + " --out " + ckpt + " --steps 4") == 2);
    REQUIRE(run("train --stage 2 --data " + data + " --out " + ckpt + " --from-stage1 " + ckpt +
                "/stage1 --steps 6 --batch 2 --eval-interval 3 --seed 5 --lr 5e-4") == 0);

    // frozen parameters: stage-1 params inside the stage-2 checkpoint are
    // byte-identical to the stage-1 checkpoint
    {
        auto s1 = nn::load_checkpoint((tmp.path / "ckpt" / "stage1").string());
        auto s2 = nn::load_checkpoint((tmp.path / "ckpt" / "stage2").string());
        for (const char* prefix : {"E_bSSFP", "E_LGE", "E_T2", "R_bSSFP", "R_T2", "D_LGE"})
            CHECK(s1->params.digest_prefix(prefix) == s2->params.digest_prefix(prefix));
    }

    REQUIRE(run("infer --checkpoint " + ckpt + "/stage2 --data " + data + " --out " + pred) == 0);
    CHECK(fs::exists(tmp.path / "pred" / "inference.json"));
    CHECK(fs::exists(tmp.path / "pred" / "sample_0000" / "final_mask.raw"));

    REQUIRE(run("evaluate --data " + data + " --pred " + pred + " --out " +
                (tmp.path / "eval").string()) == 0);
    CHECK(fs::exists(tmp.path / "eval" / "eval_seg.csv"));
    CHECK(fs::exists(tmp.path / "eval" / "eval.json"));

    REQUIRE(run("quantify --data " + data + " --pred " + pred + " --out " +
                (tmp.path / "quant").string()) == 0);
    CHECK(fs::exists(tmp.path / "quant" / "quant.csv"));
    CHECK(fs::exists(tmp.path / "quant" / "sample_0000_bullseye.svg"));
    CHECK(fs::exists(tmp.path / "quant" / "corr_scar_size.svg"));
}

TEST_CASE("evaluating gold against gold scores perfectly") {
    TmpDir tmp("umyops_cli_gold");
    const std::string data = (tmp.path / "data").string();
    REQUIRE(run("phantom --out " + data + " --count 3 --seed 4 --misalign 4 --size 32") == 0);

    // construct a prediction directory whose masks are the gold labels
    const auto ds = data::read_dataset(data);
    const std::string pred = (tmp.path / "pred").string();
    for (const auto& e : ds.entries) {
        const auto slice = data::read_slice(data + "/" + e.dir);
        fs::create_directories(pred + "/" + e.dir);
        data::write_bytes(pred + "/" + e.dir + "/final_mask.raw", slice.gold_common->raw());
    }

    REQUIRE(run("evaluate --data " + data + " --pred " + pred + " --out " +
                (tmp.path / "eval").string()) == 0);
    std::ifstream in(tmp.path / "eval" / "eval.json");
    json j;
    in >> j;
    CHECK(j["segmentation"]["aggregate"]["scar_dice"]["mean"].get<double>() ==
          doctest::Approx(1.0));
    CHECK(j["segmentation"]["aggregate"]["edema_dice"]["mean"].get<double>() ==
          doctest::Approx(1.0));
    CHECK(j["segmentation"]["aggregate"]["scar_hd_mm"]["mean"].get<double>() ==
          doctest::Approx(0.0));
}

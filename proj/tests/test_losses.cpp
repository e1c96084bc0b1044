#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "umyops/data/phantom.hpp"
#include "umyops/losses/losses.hpp"
#include "umyops/nn/model.hpp"

using namespace umyops;
using namespace umyops::losses;
using nn::Var;

namespace {

Var prob_map(const ImageD& img) {
    return nn::constant(nn::from_image(img));
}

ImageD binary_image(const MaskU8& m) {
    ImageD out(m.rows(), m.cols(), 0.0);
    for (size_t i = 0; i < m.size(); ++i) out.raw()[i] = m.raw()[i] ? 1.0 : 0.0;
    return out;
}

} // namespace

TEST_CASE("soft dice is symmetric, bounded, and permutation invariant") {
    Rng rng(201);
    for (int t = 0; t < 20; ++t) {
        const auto a = binary_image(oracles::random_mask(8, 8, rng));
        const auto b = binary_image(oracles::random_mask(8, 8, rng));
        const double dab = soft_dice_value(a, b);
        const double dba = soft_dice_value(b, a);
        CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
        CHECK(dab >= 0.0);
        CHECK(dab <= 1.0);

        // uniform spatial permutation applied to both arguments
        ImageD pa(8, 8, 0.0), pb(8, 8, 0.0);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                pa(c, r) = a(r, c);  // transpose as the permutation
                pb(c, r) = b(r, c);
            }
        CHECK(soft_dice_value(pa, pb) == doctest::Approx(dab).epsilon(1e-12));
    }
}

TEST_CASE("loss_reg reaches -2 at perfect alignment and ~0 when disjoint") {
    const int s = 16;
    std::array<ImageD, 3> cri{ImageD(s, s, 0.0), ImageD(s, s, 0.0), ImageD(s, s, 0.0)};
    for (int r = 2; r < 8; ++r)
        for (int c = 2; c < 8; ++c) cri[0](r, c) = 1.0;
    for (int r = 9; r < 13; ++r)
        for (int c = 2; c < 6; ++c) cri[1](r, c) = 1.0;
    for (int r = 9; r < 13; ++r)
        for (int c = 8; c < 12; ++c) cri[2](r, c) = 1.0;

    nn::Tensor onehot(3, s, s, 0.0f);
    for (int cls = 0; cls < 3; ++cls)
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) onehot.at(cls, r, c) = static_cast<float>(cri[cls](r, c));

    std::map<std::string, Var> warped{{"bSSFP", nn::constant(onehot)},
                                      {"T2", nn::constant(onehot)}};
    const Var perfect = loss_reg(warped, cri);
    CHECK(perfect->scalar() == doctest::Approx(-2.0).epsilon(1e-4));

    nn::Tensor far(3, s, s, 0.0f);
    for (int cls = 0; cls < 3; ++cls) far.at(cls, 15, 15) = 1.0f;
    std::map<std::string, Var> disjoint{{"bSSFP", nn::constant(far)}, {"T2", nn::constant(far)}};
    CHECK(std::fabs(loss_reg(disjoint, cri)->scalar()) < 1e-3);
}

TEST_CASE("loss_reg with ground-truth displacements on a phantom is near -2") {
    data::PhantomSpec spec;
    spec.seed = 31;
    spec.size = 64;
    spec.misalign_magnitude = 8.0;
    spec.noise_sigma = 0.0;
    const auto p = data::generate_phantom(spec);

    nn::NetConfig cfg;
    cfg.image_size = 64;
    nn::UMyoPSNet net(cfg);

    std::map<std::string, Var> warped, unaligned;
    for (const std::string seq : {data::kSeqBssfp, data::kSeqT2}) {
        const auto oh = data::anatomy_onehot(p.slice.labels.at(seq));
        nn::Tensor t(3, 64, 64, 0.0f);
        for (int cls = 0; cls < 3; ++cls)
            for (int r = 0; r < 64; ++r)
                for (int c = 0; c < 64; ++c) t.at(cls, r, c) = static_cast<float>(oh[cls](r, c));
        // ground-truth displacements are in the 64 px frame; heads predict in
        // the canonical frame, so scale up accordingly
        nn::Tensor d(32, 1, 1, 0.0f);
        const auto& gt = p.gt_disp.at(seq);
        for (int i = 0; i < 16; ++i) {
            d.v[i] = static_cast<float>(gt.deltas[i][0] * 256.0 / 64.0);
            d.v[16 + i] = static_cast<float>(gt.deltas[i][1] * 256.0 / 64.0);
        }
        unaligned[seq] = nn::constant(t);
        warped[seq] = net.warp_by_delta(nn::constant(t), nn::constant(d));
    }
    const auto cri = data::anatomy_onehot(p.slice.labels.at(data::kSeqLge));
    // bilinear one-hot warping softens a one-pixel boundary band, so the
    // optimum sits close to but not at -2; the misaligned loss is far away
    const Var loss = loss_reg(warped, cri);
    const Var initial = loss_reg(unaligned, cri);
    CHECK(loss->scalar() <= -1.7);
    CHECK(loss->scalar() <= initial->scalar() - 0.4);
}

TEST_CASE("myocardium extraction and constraint losses") {
    const int s = 8;
    ImageD gold(s, s, 0.0);
    for (int r = 2; r < 6; ++r)
        for (int c = 2; c < 6; ++c) gold(r, c) = 1.0;

    CHECK(loss_myo(prob_map(gold), gold)->scalar() == doctest::Approx(-1.0).epsilon(1e-4));

    ImageD empty(s, s, 0.0);
    CHECK(std::fabs(loss_myo(prob_map(empty), gold)->scalar()) < 1e-3);

    // checkerboard half-overlap: pred half of gold band
    ImageD half(s, s, 0.0);
    int painted = 0;
    for (int r = 2; r < 6; ++r)
        for (int c = 2; c < 6; ++c)
            if ((r + c) % 2 == 0) {
                half(r, c) = 1.0;
                ++painted;
            }
    const double d = soft_dice_value(half, gold);
    CHECK(d == doctest::Approx(2.0 * painted / (painted + 16.0)).epsilon(1e-6));

    std::map<std::string, Var> preds{{"bSSFP", prob_map(gold)}, {"T2", prob_map(gold)}};
    std::map<std::string, ImageD> golds{{"bSSFP", gold}, {"T2", gold}};
    CHECK(loss_cons(preds, golds)->scalar() == doctest::Approx(-2.0).epsilon(1e-4));

    preds["T2"] = prob_map(empty);
    CHECK(loss_cons(preds, golds)->scalar() == doctest::Approx(-1.0).epsilon(1e-3));

    // composition oracle on random maps
    Rng rng(202);
    for (int t = 0; t < 10; ++t) {
        ImageD pa(s, s, 0.0), pb(s, s, 0.0), ga(s, s, 0.0), gb(s, s, 0.0);
        for (auto& v : pa.raw()) v = rng.uniform();
        for (auto& v : pb.raw()) v = rng.uniform();
        for (auto& v : ga.raw()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        for (auto& v : gb.raw()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        std::map<std::string, Var> pr{{"bSSFP", prob_map(pa)}, {"T2", prob_map(pb)}};
        std::map<std::string, ImageD> go{{"bSSFP", ga}, {"T2", gb}};
        const double want = -(soft_dice_value(pa, ga) + soft_dice_value(pb, gb));
        CHECK(loss_cons(pr, go)->scalar() == doctest::Approx(want).epsilon(1e-5));
    }
}

TEST_CASE("hybrid loss is linear in lambda with the documented arithmetic") {
    const Var reg = nn::constant(nn::Tensor::scalar(-1.8f));
    const Var cons = nn::constant(nn::Tensor::scalar(-1.9f));
    const Var myo = nn::constant(nn::Tensor::scalar(-0.9f));

    LossConfig cfg;
    cfg.lambda_balance = 0.1;
    CHECK(loss_hybrid(reg, cons, myo, cfg)->scalar() == doctest::Approx(-2.08).epsilon(1e-6));

    cfg.lambda_balance = 0.0;
    CHECK(loss_hybrid(reg, cons, myo, cfg)->scalar() == doctest::Approx(-1.8).epsilon(1e-6));

    // exact linearity across lambda in {0, 0.1, 0.2}
    Rng rng(203);
    for (int t = 0; t < 10; ++t) {
        const float r = static_cast<float>(rng.uniform(-2, 0));
        const float c = static_cast<float>(rng.uniform(-2, 0));
        const float m = static_cast<float>(rng.uniform(-1, 0));
        auto at = [&](double lam) {
            LossConfig lc;
            lc.lambda_balance = lam;
            return loss_hybrid(nn::constant(nn::Tensor::scalar(r)), nn::constant(nn::Tensor::scalar(c)),
                               nn::constant(nn::Tensor::scalar(m)), lc)
                ->scalar();
        };
        const double l0 = at(0.0), l1 = at(0.1), l2 = at(0.2);
        CHECK(l2 - l1 == doctest::Approx(l1 - l0).epsilon(1e-4));
        CHECK(l1 == doctest::Approx(r + 0.1 * (c + m)).epsilon(1e-5));
    }
}

TEST_CASE("pathology loss: limits, uniform logits, and per-term oracle") {
    const int s = 8;
    data::LabelMask gold(s, s, data::BG);
    for (int r = 1; r < 5; ++r)
        for (int c = 1; c < 5; ++c) gold(r, c) = data::EDEMA;
    for (int r = 2; r < 4; ++r)
        for (int c = 2; c < 4; ++c) gold(r, c) = data::SCAR;

    // saturated correct logits approach -1 + 0
    nn::Tensor logits(3, s, s, 0.0f);
    const auto targets = pathology_targets(gold);
    for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
            for (int k = 0; k < 3; ++k) logits.at(k, r, c) = -30.0f;
            logits.at(targets(r, c), r, c) = 30.0f;
        }
    const Var near_perfect = loss_pathology(nn::constant(logits), gold);
    CHECK(near_perfect->scalar() == doctest::Approx(-1.0).epsilon(1e-3));

    // uniform logits: CE term is exactly ln 3
    const Var uniform = loss_pathology(nn::constant(nn::Tensor(3, s, s, 0.2f)), gold);
    double edema_px = 0, scar_px = 0;
    for (const auto v : gold.raw()) {
        edema_px += v == data::EDEMA;
        scar_px += v == data::SCAR;
    }
    const double npx = s * s;
    const double dice_e = (2.0 * edema_px / 3.0 + 1e-5) / (npx / 3.0 + edema_px + 1e-5);
    const double dice_s = (2.0 * scar_px / 3.0 + 1e-5) / (npx / 3.0 + scar_px + 1e-5);
    const double want = -(dice_e + dice_s) / 2.0 + std::log(3.0);
    CHECK(uniform->scalar() == doctest::Approx(want).epsilon(1e-4));

    // random case against the independent per-term computation
    Rng rng(204);
    nn::Tensor rl(3, s, s, 0.0f);
    for (auto& v : rl.v) v = static_cast<float>(rng.gaussian());
    const Var total = loss_pathology(nn::constant(rl), gold);

    const nn::Tensor probs = nn::softmax_infer(rl);
    ImageD pe(s, s, 0.0), ps(s, s, 0.0);
    double ce = 0.0;
    const size_t plane = s * s;
    for (size_t i = 0; i < plane; ++i) {
        pe.raw()[i] = probs.v[nn::kClassEdema * plane + i];
        ps.raw()[i] = probs.v[nn::kClassScar * plane + i];
        ce -= std::log(probs.v[targets.raw()[i] * plane + i]);
    }
    ce /= static_cast<double>(plane);
    ImageD ge(s, s, 0.0), gs(s, s, 0.0);
    for (size_t i = 0; i < plane; ++i) {
        ge.raw()[i] = gold.raw()[i] == data::EDEMA ? 1.0 : 0.0;
        gs.raw()[i] = gold.raw()[i] == data::SCAR ? 1.0 : 0.0;
    }
    const double oracle =
        -(soft_dice_value(pe, ge) + soft_dice_value(ps, gs)) / 2.0 + ce;
    CHECK(total->scalar() == doctest::Approx(oracle).epsilon(1e-4));

    // undeclared classes rejected
    data::LabelMask bad = gold;
    bad(0, 0) = data::MYO;
    CHECK_THROWS_AS(loss_pathology(nn::constant(rl), bad), InvalidArgument);
}

TEST_CASE("losses stay finite and differentiable on random inputs") {
    Rng rng(205);
    const int s = 8;
    for (int t = 0; t < 5; ++t) {
        nn::Tensor raw(1, s, s, 0.0f);
        for (auto& v : raw.v) v = static_cast<float>(rng.gaussian());
        auto pred = nn::sigmoid(nn::make_param(raw, "p"));
        ImageD gold(s, s, 0.0);
        for (auto& v : gold.raw()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const Var l = loss_myo(pred, gold);
        CHECK(std::isfinite(l->scalar()));
        nn::backward(l);
    }
}

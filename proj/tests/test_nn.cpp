#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "oracles.hpp"
#include "umyops/nn/model.hpp"

using namespace umyops;
using namespace umyops::nn;

namespace {

Tensor random_tensor(int c, int h, int w, Rng& rng, float amp = 1.0f) {
    Tensor t(c, h, w);
    for (auto& v : t.v) v = static_cast<float>(amp * rng.gaussian());
    return t;
}

// Central-difference check of d(loss)/d(leaf) for a sampled set of indices.
// rebuild() must construct the scalar loss from current leaf values.
void gradcheck(const std::function<Var()>& rebuild, const std::vector<Var>& leaves, Rng& rng,
               double step = 1e-2, double tol = 2e-2, int samples_per_leaf = 12) {
    for (auto& l : leaves) l->zero_grad();
    Var loss = rebuild();
    backward(loss);

    for (const auto& leaf : leaves) {
        std::vector<float> analytic(leaf->grad.v);
        double gscale = 0.0;
        for (const float g : analytic) gscale = std::max(gscale, std::fabs(static_cast<double>(g)));
        gscale = std::max(gscale, 1e-4);

        const int n = static_cast<int>(leaf->val.size());
        for (int s = 0; s < samples_per_leaf; ++s) {
            const int i = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(n)));
            const float keep = leaf->val.v[i];
            leaf->val.v[i] = keep + static_cast<float>(step);
            const double fp = rebuild()->scalar();
            leaf->val.v[i] = keep - static_cast<float>(step);
            const double fm = rebuild()->scalar();
            leaf->val.v[i] = keep;
            const double fd = (fp - fm) / (2.0 * step);
            CHECK(std::fabs(analytic[i] - fd) <=
                  tol * std::max({std::fabs(fd), std::fabs(static_cast<double>(analytic[i])), gscale}));
        }
    }
}

// Sum of all entries as a scalar Var (ones-weighted fc over the GAP).
Var sum_all(const Var& x) {
    const Var g = global_avg_pool(x);
    const int n = g->val.c;
    Var w = constant(Tensor(1, n, 1, 1.0f));
    const Var total = fully_connected(g, w, nullptr, 1, n);
    return scale(total, static_cast<float>(x->val.plane()));
}

} // namespace

TEST_CASE("elementwise op gradients") {
    Rng rng(101);
    auto a = make_param(random_tensor(2, 5, 5, rng), "a");
    auto b = make_param(random_tensor(2, 5, 5, rng), "b");
    gradcheck([&] { return sum_all(mul(add(a, b), sigmoid(sub(a, scale(b, 0.7f))))); }, {a, b}, rng);
}

TEST_CASE("relu gradient away from the kink") {
    Rng rng(102);
    auto a = make_param(random_tensor(3, 4, 4, rng), "a");
    for (auto& v : a->val.v)
        if (std::fabs(v) < 0.05f) v = 0.2f;
    gradcheck([&] { return sum_all(relu(a)); }, {a}, rng);
}

TEST_CASE("conv2d matches finite differences for input, weight, and bias") {
    Rng rng(103);
    auto x = make_param(random_tensor(3, 6, 6, rng), "x");
    auto w = make_param(random_tensor(4, 3 * 9, 1, rng, 0.4f), "w");
    auto b = make_param(random_tensor(4, 1, 1, rng, 0.1f), "b");
    gradcheck([&] { return sum_all(sigmoid(conv2d(x, w, b, 4, 3, 3))); }, {x, w, b}, rng);

    auto w1 = make_param(random_tensor(2, 3, 1, rng, 0.4f), "w1");
    gradcheck([&] { return sum_all(sigmoid(conv2d(x, w1, nullptr, 2, 3, 1))); }, {x, w1}, rng);
}

TEST_CASE("pooling, upsampling, resize, gap and fc gradients") {
    Rng rng(104);
    auto x = make_param(random_tensor(2, 8, 8, rng), "x");
    gradcheck([&] { return sum_all(maxpool2(x)); }, {x}, rng, 1e-2, 3e-2);
    gradcheck([&] { return sum_all(upsample_nearest2(x)); }, {x}, rng);
    gradcheck([&] { return sum_all(resize_bilinear(x, 5, 7)); }, {x}, rng);

    auto w = make_param(random_tensor(3, 2, 1, rng, 0.5f), "w");
    auto b = make_param(random_tensor(3, 1, 1, rng, 0.1f), "b");
    gradcheck([&] { return sum_all(sigmoid(fully_connected(global_avg_pool(x), w, b, 3, 2))); },
              {x, w, b}, rng);
}

TEST_CASE("softmax cross entropy value and gradient") {
    Rng rng(105);
    // uniform logits on 3 classes: CE = ln 3
    auto uniform = constant(Tensor(3, 4, 4, 0.37f));
    MaskU8 target(4, 4, 1);
    const Var ce0 = softmax_cross_entropy(uniform, target);
    CHECK(ce0->scalar() == doctest::Approx(std::log(3.0)).epsilon(1e-6));

    auto logits = make_param(random_tensor(3, 5, 5, rng), "logits");
    MaskU8 t(5, 5, 0);
    for (auto& v : t.raw()) v = static_cast<uint8_t>(rng.uniform_int(3));
    gradcheck([&] { return softmax_cross_entropy(logits, t); }, {logits}, rng, 1e-2, 1e-2);

    // differentiable softmax agrees with the inference path
    const Var sm = softmax(logits);
    const Tensor smi = softmax_infer(logits->val);
    for (size_t i = 0; i < sm->val.size(); ++i)
        CHECK(sm->val.v[i] == doctest::Approx(smi.v[i]).epsilon(1e-6));
    auto logits2 = make_param(random_tensor(3, 4, 4, rng), "logits2");
    ImageD tmask(4, 4, 0.0);
    for (auto& v : tmask.raw()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    gradcheck([&] { return soft_dice_score(softmax(logits2), 1, tmask, 1e-5); }, {logits2}, rng,
              1e-2, 2e-2);
}

TEST_CASE("soft dice values on known cases") {
    ImageD target(2, 2, 0.0);
    target(0, 0) = 1.0;
    target(0, 1) = 1.0;

    Tensor same(1, 2, 2, 0.0f);
    same.v = {1.0f, 1.0f, 0.0f, 0.0f};
    CHECK(soft_dice_score(constant(same), 0, target, 1e-5)->scalar() ==
          doctest::Approx(1.0).epsilon(1e-5));

    Tensor disjoint(1, 2, 2, 0.0f);
    disjoint.v = {0.0f, 0.0f, 1.0f, 1.0f};
    CHECK(soft_dice_score(constant(disjoint), 0, target, 1e-5)->scalar() ==
          doctest::Approx(0.0).epsilon(1e-4));

    // pred covers 2 px, target 2 px, overlap 1 -> 2*1/(2+2) = 0.5
    Tensor half(1, 2, 2, 0.0f);
    half.v = {1.0f, 0.0f, 0.0f, 1.0f};
    CHECK(soft_dice_score(constant(half), 0, target, 1e-5)->scalar() ==
          doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("tps_warp gradients flow into features and displacements") {
    Rng rng(106);
    NetConfig cfg;
    cfg.image_size = 16;
    cfg.channels = {4, 8, 12, 16};
    UMyoPSNet net(cfg);
    const auto& basis = net.basis_for(16);

    auto x = make_param(random_tensor(2, 16, 16, rng), "x");
    auto delta = make_param(Tensor(32, 1, 1, 0.0f), "delta");
    for (auto& v : delta->val.v) v = static_cast<float>(rng.uniform(-8.0, 8.0));

    ImageD target(16, 16, 0.0);
    for (auto& v : target.raw()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;

    gradcheck(
        [&] {
            const Var warped = tps_warp(x, delta, basis, 16.0 / 256.0);
            return soft_dice_score(sigmoid(warped), 0, target, 1e-5);
        },
        {x, delta}, rng, 2e-2, 3e-2);
}

TEST_CASE("MSF with zero displacement is exactly channel concatenation") {
    Rng rng(107);
    NetConfig cfg;
    cfg.image_size = 32;
    UMyoPSNet net(cfg);
    for (int trial = 0; trial < 50; ++trial) {
        const int size = trial % 2 == 0 ? 8 : 16;
        const int c = 3 + static_cast<int>(rng.uniform_int(5));
        auto f_in = constant(random_tensor(2, size, size, rng));
        auto f_b = constant(random_tensor(c, size, size, rng));
        auto f_t = constant(random_tensor(c, size, size, rng));
        auto f_l = constant(random_tensor(c, size, size, rng));
        auto zero = constant(Tensor(32, 1, 1, 0.0f));

        const Var fused = net.msf_fuse(f_in, f_b, f_t, f_l, zero, zero, 256.0);
        const Var plain = concat({f_b, f_t, f_l, f_in});
        REQUIRE(fused->val.size() == plain->val.size());
        for (size_t i = 0; i < fused->val.size(); ++i)
            CHECK(fused->val.v[i] == plain->val.v[i]);  // bit-exact
    }
}

TEST_CASE("MSF warps each channel like the reference image warp") {
    Rng rng(108);
    NetConfig cfg;
    cfg.image_size = 32;
    UMyoPSNet net(cfg);
    const int size = 16;

    // integer translation at feature scale: content shifts with zero fill
    {
        auto f_b = constant(random_tensor(3, size, size, rng));
        auto zero = constant(Tensor(32, 1, 1, 0.0f));
        Tensor d(32, 1, 1, 0.0f);
        // canonical-frame displacement that lands on exactly 2 px at size 16
        for (int i = 0; i < 16; ++i) d.v[i] = 2.0f * 256.0f / size;
        auto delta = constant(std::move(d));
        const Var fused = net.msf_fuse(f_b, f_b, f_b, f_b, delta, zero, 256.0);
        for (int ci = 0; ci < 3; ++ci)
            for (int r = 0; r < size; ++r)
                for (int col = 0; col < size; ++col) {
                    const float want = r + 2 < size ? f_b->val.at(ci, r + 2, col) : 0.0f;
                    CHECK(fused->val.at(ci, r, col) == doctest::Approx(want).epsilon(1e-5));
                }
    }

    // random smooth warp equals tps::warp_image channel by channel
    for (int trial = 0; trial < 3; ++trial) {
        auto f_b = constant(random_tensor(4, size, size, rng));
        auto zero = constant(Tensor(32, 1, 1, 0.0f));
        Tensor d(32, 1, 1, 0.0f);
        for (auto& v : d.v) v = static_cast<float>(rng.uniform(-10.0, 10.0));
        auto delta = constant(d);

        const Var fused = net.msf_fuse(f_b, f_b, f_b, f_b, delta, zero, 256.0);

        const auto grid = tps::scale_control_grid(tps::make_control_grid(4, 256.0),
                                                  size / 256.0, size / 256.0);
        tps::DisplacementSet ds;
        ds.frame_h = ds.frame_w = size;
        for (int i = 0; i < 16; ++i)
            ds.deltas.push_back({d.v[i] * size / 256.0, d.v[16 + i] * size / 256.0});
        const auto coeffs = tps::solve_tps(grid, ds);
        for (int ci = 0; ci < 4; ++ci) {
            const ImageD chan = to_image(f_b->val, ci);
            const ImageD want = tps::warp_image(chan, coeffs, tps::Interp::Bilinear);
            for (int r = 0; r < size; ++r)
                for (int col = 0; col < size; ++col)
                    CHECK(fused->val.at(ci, r, col) ==
                          doctest::Approx(want(r, col)).epsilon(5e-4));
        }
    }
}

TEST_CASE("SPG attention is exactly one half wherever the prior is zero") {
    Rng rng(109);
    NetConfig cfg;
    cfg.image_size = 32;
    UMyoPSNet net(cfg);

    for (int trial = 0; trial < 50; ++trial) {
        const int size = 8 + 8 * static_cast<int>(rng.uniform_int(2));
        const int c = 2 + static_cast<int>(rng.uniform_int(4));
        auto f_in = constant(random_tensor(c, size, size, rng));
        auto f_mp = constant(random_tensor(c, size, size, rng));

        // prior identically zero: output = concat(0.5*F_mp, F_in) bit-exact
        auto zero_prior = constant(Tensor(1, size, size, 0.0f));
        const Var out = net.spg_gate(f_in, f_mp, zero_prior);
        const size_t plane = static_cast<size_t>(size) * size;
        for (int ci = 0; ci < c; ++ci)
            for (size_t i = 0; i < plane; ++i)
                CHECK(out->val.v[ci * plane + i] == 0.5f * f_mp->val.v[ci * plane + i]);
        for (size_t i = 0; i < static_cast<size_t>(c) * plane; ++i)
            CHECK(out->val.v[c * plane + i] == f_in->val.v[i]);

        // binary prior at feature resolution: 0.5 exactly where the mask is 0
        Tensor prior(1, size, size, 0.0f);
        for (auto& v : prior.v) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
        auto p = constant(prior);
        const Var gated = net.spg_gate(f_in, f_mp, p);
        for (int ci = 0; ci < c; ++ci)
            for (size_t i = 0; i < plane; ++i)
                if (prior.v[i] == 0.0f)
                    CHECK(gated->val.v[ci * plane + i] == 0.5f * f_mp->val.v[ci * plane + i]);
    }

    // additive cancellation: prior of ones, F_in = -F_mp -> attention 0.5
    auto f_mp = constant(random_tensor(3, 8, 8, rng));
    Tensor neg = f_mp->val;
    for (auto& v : neg.v) v = -v;
    auto f_in = constant(std::move(neg));
    auto ones = constant(Tensor(1, 8, 8, 1.0f));
    const Var out = net.spg_gate(f_in, f_mp, ones);
    for (size_t i = 0; i < f_mp->val.size(); ++i)
        CHECK(out->val.v[i] == 0.5f * f_mp->val.v[i]);

    // attention strictly inside (0,1): gated magnitude bounded by the input
    auto prior = constant(Tensor(1, 8, 8, 0.7f));
    const Var g2 = net.spg_gate(constant(random_tensor(3, 8, 8, rng)), f_mp, prior);
    for (size_t i = 0; i < f_mp->val.size(); ++i)
        CHECK(std::fabs(g2->val.v[i]) <= std::fabs(f_mp->val.v[i]));
}

TEST_CASE("fresh registration heads output exactly zero displacements") {
    Rng rng(110);
    NetConfig cfg;
    cfg.image_size = 32;
    cfg.channels = {4, 8, 12, 16};
    UMyoPSNet net(cfg);

    auto img = constant(random_tensor(1, 32, 32, rng));
    auto cri = constant(random_tensor(1, 32, 32, rng));
    const auto fs = net.encode("E_bSSFP", img, 1);
    const auto fc = net.encode("E_LGE", cri, 1);
    const Var delta = net.reg_head("R_bSSFP", fs, fc);
    REQUIRE(delta->val.size() == 32);
    for (const float v : delta->val.v) CHECK(v == 0.0f);

    // and the induced warp is the identity
    const Var warped = net.warp_by_delta(img, delta);
    for (size_t i = 0; i < img->val.size(); ++i)
        CHECK(warped->val.v[i] == doctest::Approx(img->val.v[i]).epsilon(1e-6));
}

TEST_CASE("full forward shapes and ranges") {
    Rng rng(111);
    NetConfig cfg;
    cfg.image_size = 32;
    cfg.channels = {4, 8, 12, 16};
    UMyoPSNet net(cfg);

    auto ib = constant(random_tensor(1, 32, 32, rng));
    auto il = constant(random_tensor(1, 32, 32, rng));
    auto it = constant(random_tensor(1, 32, 32, rng));
    const auto fb = net.encode("E_bSSFP", ib, 1);
    const auto fl = net.encode("E_LGE", il, 1);
    const auto ft = net.encode("E_T2", it, 1);
    const Var db = net.reg_head("R_bSSFP", fb, fl);
    const Var dt = net.reg_head("R_T2", ft, fl);

    const Var myo_lge = net.decode_myo_msf(fl, fb, ft, db, dt);
    const Var myo_b = net.decode_myo_plain("D_bSSFP", fb);
    CHECK(myo_lge->val.c == 1);
    CHECK(myo_lge->val.h == 32);
    for (const float v : myo_lge->val.v) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    for (const float v : myo_b->val.v) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    const Var aligned = concat({net.warp_by_delta(ib, db), il, net.warp_by_delta(it, dt)});
    const Var logits = net.pathology_logits(aligned, detach(myo_lge));
    CHECK(logits->val.c == 3);
    CHECK(logits->val.h == 32);
    CHECK(logits->val.w == 32);
    CHECK(logits->val.finite());
}

TEST_CASE("gradients reach the registration head through the warp and losses") {
    Rng rng(112);
    NetConfig cfg;
    cfg.image_size = 32;
    cfg.channels = {3, 5, 7, 9};
    UMyoPSNet net(cfg);
    const int s = 32;

    auto img_b = constant(random_tensor(1, s, s, rng));
    auto img_l = constant(random_tensor(1, s, s, rng));
    // soft-edged targets keep the finite-difference probe well conditioned
    // (hard masks make the bilinear interpolant kink-dominated)
    auto soft_disk = [s](double cr, double cc, double rad) {
        ImageD m(s, s, 0.0);
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) {
                const double d = std::hypot(r - cr, c - cc);
                m(r, c) = 1.0 / (1.0 + std::exp((d - rad) / 2.5));
            }
        return m;
    };
    ImageD onehot[3] = {soft_disk(16, 16, 9), soft_disk(10, 20, 5), soft_disk(22, 10, 5)};
    Tensor shifted(3, s, s, 0.0f);
    const ImageD moved[3] = {soft_disk(20, 16, 9), soft_disk(14, 20, 5), soft_disk(26, 10, 5)};
    for (int cls = 0; cls < 3; ++cls)
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) shifted.at(cls, r, c) = static_cast<float>(moved[cls](r, c));
    auto src_var = constant(shifted);

    auto rebuild = [&]() {
        const auto fb = net.encode("E_bSSFP", img_b, 1);
        const auto fl = net.encode("E_LGE", img_l, 1);
        const Var delta = net.reg_head("R_bSSFP", fb, fl);
        const Var warped = net.warp_by_delta(src_var, delta);
        Var total;
        for (int cls = 0; cls < 3; ++cls) {
            const Var d = soft_dice_score(warped, cls, onehot[cls], 1e-5);
            total = total ? add(total, d) : d;
        }
        return scale(total, -1.0f / 3.0f);
    };

    rebuild();  // materialize parameters before looking them up

    // nudge the head off exact zero so gradients are informative
    auto& fc1_w = *net.params.all().find("R_bSSFP/fc1/w")->second;
    for (auto& v : fc1_w.val.v) v = static_cast<float>(0.3 * rng.gaussian());

    // two-parameter probe: the strongest-gradient scalar in each fc layer
    std::vector<Var> probes{net.params.all().find("R_bSSFP/fc1/w")->second,
                            net.params.all().find("R_bSSFP/fc0/w")->second};
    for (auto& p : probes) p->zero_grad();
    backward(rebuild());
    for (const auto& leaf : probes) {
        int best = 0;
        for (size_t i = 1; i < leaf->grad.size(); ++i)
            if (std::fabs(leaf->grad.v[i]) > std::fabs(leaf->grad.v[best]))
                best = static_cast<int>(i);
        const double analytic = leaf->grad.v[best];
        const double step = 1e-2;
        const float keep = leaf->val.v[best];
        leaf->val.v[best] = keep + static_cast<float>(step);
        const double fp = rebuild()->scalar();
        leaf->val.v[best] = keep - static_cast<float>(step);
        const double fm = rebuild()->scalar();
        leaf->val.v[best] = keep;
        const double fd = (fp - fm) / (2.0 * step);
        CHECK(std::fabs(analytic - fd) <= 1e-2 * std::max(std::fabs(fd), std::fabs(analytic)));
    }
}

TEST_CASE("checkpoints round-trip byte-exactly and reproduce outputs") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "umyops_ckpt_test";
    fs::remove_all(dir);

    Rng rng(113);
    NetConfig cfg;
    cfg.image_size = 32;
    cfg.channels = {4, 8, 12, 16};
    UMyoPSNet net(cfg);

    auto img = constant(random_tensor(1, 32, 32, rng));
    const auto f = net.encode("E_LGE", img, 1);
    const Var myo = net.decode_myo_plain("D_LGE_aux", f);  // materialize params

    save_checkpoint((dir / "a").string(), net, {{"stage", 1}});
    auto loaded = load_checkpoint((dir / "a").string());
    CHECK(loaded->params.digest() == net.params.digest());

    save_checkpoint((dir / "b").string(), *loaded, {{"stage", 1}});
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "a" / "params.bin") == slurp(dir / "b" / "params.bin"));

    const auto f2 = loaded->encode("E_LGE", img, 1);
    const Var myo2 = loaded->decode_myo_plain("D_LGE_aux", f2);
    for (size_t i = 0; i < myo->val.size(); ++i) CHECK(myo->val.v[i] == myo2->val.v[i]);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing").string()), IoError);
    fs::remove_all(dir);
}

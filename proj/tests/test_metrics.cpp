#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "umyops/metrics/metrics.hpp"

using namespace umyops;
namespace M = umyops::metrics;

namespace {

MaskU8 shift_mask(const MaskU8& m, int dr, int dc) {
    MaskU8 out(m.rows(), m.cols(), 0);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            const int rr = r + dr, cc = c + dc;
            if (m(r, c) && out.in_bounds(rr, cc)) out(rr, cc) = 1;
        }
    return out;
}

} // namespace

TEST_CASE("hard Dice basics and oracle agreement") {
    MaskU8 a(4, 4, 1), b(4, 4, 1);
    CHECK(M::dice_hard(a, b) == 1.0);

    MaskU8 c(4, 4, 0);
    c(0, 0) = 1;
    MaskU8 d(4, 4, 0);
    d(3, 3) = 1;
    CHECK(M::dice_hard(c, d) == 0.0);

    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto x = oracles::random_mask(8, 8, rng);
        const auto y = oracles::random_mask(8, 8, rng);
        CHECK(M::dice_hard(x, y) == oracles::dice_ref(x, y));
    }
}

TEST_CASE("Hausdorff distance: exact values and brute-force equality") {
    MaskU8 a(8, 8, 0);
    a(2, 2) = 1;
    CHECK(M::hausdorff_mm(a, a, {1.0, 1.0}) == 0.0);

    MaskU8 b(8, 8, 0);
    b(2, 5) = 1;  // 3 px apart at 1 mm
    CHECK(M::hausdorff_mm(a, b, {1.0, 1.0}) == doctest::Approx(3.0));
    // anisotropic spacing scales the distance
    CHECK(M::hausdorff_mm(a, b, {1.0, 2.0}) == doctest::Approx(6.0));

    MaskU8 empty(8, 8, 0);
    CHECK_THROWS_AS(M::hausdorff_mm(a, empty, {1.0, 1.0}), M::UndefinedMetric);

    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        auto x = oracles::random_mask(8, 8, rng);
        auto y = oracles::random_mask(8, 8, rng);
        bool xe = true, ye = true;
        for (auto v : x.raw()) xe &= v == 0;
        for (auto v : y.raw()) ye &= v == 0;
        if (xe || ye) continue;
        CHECK(M::hausdorff_mm(x, y, {1.3, 0.8}) ==
              doctest::Approx(oracles::hausdorff_ref(x, y, 1.3, 0.8)).epsilon(1e-12));
    }
}

TEST_CASE("Hausdorff is symmetric and translation invariant with Dice") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto x = oracles::random_mask(12, 12, rng, 0.3);
        const auto y = oracles::random_mask(12, 12, rng, 0.3);
        bool xe = true, ye = true;
        for (auto v : x.raw()) xe &= v == 0;
        for (auto v : y.raw()) ye &= v == 0;
        if (xe || ye) continue;
        CHECK(M::hausdorff_mm(x, y, {1, 1}) == M::hausdorff_mm(y, x, {1, 1}));

        // joint translation inside a larger canvas changes nothing
        MaskU8 bx(20, 20, 0), by(20, 20, 0), sx(20, 20, 0), sy(20, 20, 0);
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) {
                bx(r, c) = x(r, c);
                by(r, c) = y(r, c);
                sx(r + 4, c + 5) = x(r, c);
                sy(r + 4, c + 5) = y(r, c);
            }
        CHECK(M::dice_hard(bx, by) == M::dice_hard(sx, sy));
        CHECK(M::hausdorff_mm(bx, by, {1, 1}) ==
              doctest::Approx(M::hausdorff_mm(sx, sy, {1, 1})).epsilon(1e-12));
    }
}

TEST_CASE("sensitivity and precision with flags") {
    MaskU8 a(6, 6, 1);
    const auto perfect = M::sensitivity_precision(a, a);
    CHECK(perfect.sen == 1.0);
    CHECK(perfect.pre == 1.0);
    CHECK(perfect.sen_defined);
    CHECK(perfect.pre_defined);

    MaskU8 empty(6, 6, 0);
    const auto none = M::sensitivity_precision(empty, a);
    CHECK(none.sen == 0.0);
    CHECK(none.pre == 0.0);
    CHECK(none.sen_defined);
    CHECK_FALSE(none.pre_defined);  // no predicted positives

    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const auto p = oracles::random_mask(8, 8, rng);
        const auto g = oracles::random_mask(8, 8, rng);
        const auto sp = M::sensitivity_precision(p, g);
        const auto ref = oracles::sen_pre_ref(p, g);
        CHECK(sp.sen == doctest::Approx(ref[0]));
        CHECK(sp.pre == doctest::Approx(ref[1]));
    }
}

TEST_CASE("registration evaluation mirrors its definition") {
    Rng rng(5);
    const auto x = oracles::random_mask(16, 16, rng, 0.3);
    const auto same = M::eval_registration(x, x, {1.5, 1.5});
    CHECK(same.dice == 1.0);
    REQUIRE(same.hd_mm.has_value());
    CHECK(*same.hd_mm == 0.0);

    const auto shifted = shift_mask(x, 2, 0);
    const auto initial = M::eval_registration(shifted, x, {1.5, 1.5});
    CHECK(initial.dice == oracles::dice_ref(shifted, x));

    MaskU8 empty(16, 16, 0);
    const auto degenerate = M::eval_registration(empty, x, {1.5, 1.5});
    CHECK_FALSE(degenerate.hd_mm.has_value());
}

TEST_CASE("displacement statistics") {
    tps::DisplacementSet zeros;
    zeros.deltas.assign(16, {0.0, 0.0});
    zeros.frame_h = zeros.frame_w = 256;
    const auto zs = M::displacement_stats({zeros}, 256, 256);
    CHECK(zs.median == 0.0);
    CHECK(zs.max == 0.0);
    CHECK(zs.count == 16);

    tps::DisplacementSet one;
    one.deltas = {{25.6, 0.0}};
    one.frame_h = one.frame_w = 256;
    const auto os = M::displacement_stats({one}, 256, 256);
    CHECK(os.median == doctest::Approx(0.1));

    Rng rng(6);
    std::vector<tps::DisplacementSet> sets;
    std::vector<double> norms;
    for (int s = 0; s < 4; ++s) {
        tps::DisplacementSet d;
        d.frame_h = d.frame_w = 256;
        for (int k = 0; k < 16; ++k) {
            const double dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20);
            d.deltas.push_back({dx, dy});
            norms.push_back(std::sqrt((dx / 256) * (dx / 256) + (dy / 256) * (dy / 256)));
        }
        sets.push_back(std::move(d));
    }
    const auto st = M::displacement_stats(sets, 256, 256);
    std::sort(norms.begin(), norms.end());
    CHECK(st.max == doctest::Approx(norms.back()));
    const double h = (norms.size() - 1) * 0.5;
    const double med = norms[static_cast<size_t>(h)] +
                       (h - std::floor(h)) * (norms[static_cast<size_t>(h) + 1] - norms[static_cast<size_t>(h)]);
    CHECK(st.median == doctest::Approx(med));
}

TEST_CASE("report table aggregates and serializes") {
    M::ReportTable t("umyops-eval-v1", {"dice", "hd_mm"});
    t.add_row("s0", {1.0, 0.0});
    t.add_row("s1", {0.5, std::nullopt});
    t.add_row("s2", {0.75, 3.0});

    const auto j = t.to_json();
    CHECK(j["aggregate"]["dice"]["mean"].get<double>() == doctest::Approx(0.75));
    CHECK(j["aggregate"]["hd_mm"]["missing"].get<int>() == 1);
    CHECK(j["aggregate"]["hd_mm"]["n"].get<int>() == 2);

    const auto agg = M::aggregate({1.0, 0.5, std::nullopt});
    CHECK(agg.n == 2);
    CHECK(agg.missing == 1);
    CHECK(agg.mean == doctest::Approx(0.75));
}

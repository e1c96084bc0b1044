#include "umyops/data/phantom.hpp"

#include <cmath>

#include "umyops/core/rng.hpp"

namespace umyops::data {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Analytic scene geometry in the CRI frame, evaluable at real coordinates.
struct Scene {
    double cx, cy;            // heart centre (row, col)
    double r_in, r_out;       // myocardial annulus
    double rv_cx, rv_cy, rv_r;
    double edema_start, edema_span;   // angles, radians
    double scar_start, scar_span;

    static double wrap(double a) {
        while (a < 0) a += kTwoPi;
        while (a >= kTwoPi) a -= kTwoPi;
        return a;
    }

    bool in_wedge(double ang, double start, double span) const {
        if (span <= 0.0) return false;
        const double rel = wrap(ang - start);
        return rel < span;
    }

    Label label_at(double r, double c) const {
        const double d = std::hypot(r - cx, c - cy);
        if (d <= r_in) return LV;
        if (d <= r_out) {
            const double ang = wrap(std::atan2(c - cy, r - cx));
            if (in_wedge(ang, scar_start, scar_span)) return SCAR;
            if (in_wedge(ang, edema_start, edema_span)) return EDEMA;
            return MYO;
        }
        if (std::hypot(r - rv_cx, c - rv_cy) <= rv_r) return RV;
        return BG;
    }
};

double intensity_of(const std::string& seq, Label l, double t2_blood, double myo_override) {
    if (l == MYO && myo_override >= 0.0) return myo_override;
    // Sequence roles: bSSFP shows anatomy only, LGE highlights scar, T2
    // highlights edema (and scar, which sits inside the edematous region).
    // LGE scar is deliberately close to blood-pool intensity so the
    // myocardium prior genuinely matters for pathology segmentation.
    if (seq == kSeqBssfp) {
        switch (l) {
            case LV: return 0.85;
            case RV: return 0.80;
            case SCAR:
            case EDEMA:
            case MYO: return myo_override >= 0.0 ? myo_override : 0.30;
            default: return 0.05;
        }
    }
    if (seq == kSeqLge) {
        switch (l) {
            case LV: return 0.85;
            case RV: return 0.78;
            case SCAR: return 0.85;
            case EDEMA:
            case MYO: return myo_override >= 0.0 ? myo_override : 0.20;
            default: return 0.05;
        }
    }
    // T2
    switch (l) {
        case LV: return t2_blood;
        case RV: return t2_blood - 0.05;
        case SCAR:
        case EDEMA: return 0.85;
        case MYO: return myo_override >= 0.0 ? myo_override : 0.30;
        default: return 0.05;
    }
}

// Label availability per sequence: scar is only delineated on LGE, edema
// only on T2; invisible pathology reads as plain myocardium.
uint8_t observed_label(const std::string& seq, Label l) {
    if (l == SCAR) {
        if (seq == kSeqLge) return SCAR;
        if (seq == kSeqT2) return EDEMA;
        return MYO;
    }
    if (l == EDEMA) return seq == kSeqT2 ? EDEMA : MYO;
    return l;
}

// Displacement part of the spline (mapped position minus identity).
std::array<double, 2> disp_at(const tps::TpsCoefficients& coeffs, double x, double y) {
    const auto p = tps::evaluate(coeffs, x, y);
    return {p[0] - x, p[1] - y};
}

// Invert q + f(q) = p by fixed-point iteration; small smooth warps converge
// in a handful of steps.
std::array<double, 2> invert_warp(const tps::TpsCoefficients& coeffs, double px, double py) {
    double qx = px, qy = py;
    for (int it = 0; it < 25; ++it) {
        const auto f = disp_at(coeffs, qx, qy);
        const double nx = px - f[0];
        const double ny = py - f[1];
        if (std::fabs(nx - qx) < 1e-10 && std::fabs(ny - qy) < 1e-10) {
            qx = nx;
            qy = ny;
            break;
        }
        qx = nx;
        qy = ny;
    }
    return {qx, qy};
}

} // namespace

void PhantomSpec::validate() const {
    if (size < 16) throw InvalidArgument("phantom: size too small");
    if (spacing_mm <= 0) throw InvalidArgument("phantom: spacing must be positive");
    if (misalign_magnitude < 0) throw InvalidArgument("phantom: negative misalignment");
    if (scar_fraction < 0 || scar_fraction > 1 || edema_fraction < 0 || edema_fraction > 1)
        throw InvalidArgument("phantom: fractions must lie in [0,1]");
    if (scar_fraction > edema_fraction)
        throw InvalidArgument("phantom: scar region must fit inside the edema region");
    if (scar_fraction + edema_fraction > 2.0 || edema_fraction > 0.95)
        throw InvalidArgument("phantom: pathology fractions exceed the myocardium");
    if (noise_sigma < 0) throw InvalidArgument("phantom: negative noise");
    if (center_jitter_frac < 0 || center_jitter_frac > 0.2)
        throw InvalidArgument("phantom: centre jitter out of range");
    if (!(r_out_min > 0) || !(r_out_max < 0.5) || r_out_min > r_out_max)
        throw InvalidArgument("phantom: bad radius range");
}

PhantomSample generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL);

    const int n = spec.size;
    const double ctr = 0.5 * (n - 1);

    Scene scene;
    scene.cx = ctr + rng.uniform(-spec.center_jitter_frac, spec.center_jitter_frac) * n;
    scene.cy = ctr + rng.uniform(-spec.center_jitter_frac, spec.center_jitter_frac) * n;
    scene.r_out = n * rng.uniform(spec.r_out_min, spec.r_out_max);
    scene.r_in = scene.r_out * rng.uniform(0.54, 0.62);
    const double rv_ang = rng.uniform(0.0, kTwoPi);
    scene.rv_r = scene.r_out * rng.uniform(0.48, 0.58);
    const double rv_dist = scene.r_out + scene.rv_r * 0.72;
    scene.rv_cx = scene.cx + rv_dist * std::cos(rv_ang);
    scene.rv_cy = scene.cy + rv_dist * std::sin(rv_ang);

    // Full-thickness wedges: area fraction of the annulus equals the angular
    // fraction, so the wedge spans are the requested fractions of 2*pi.
    scene.edema_span = spec.edema_fraction * kTwoPi;
    scene.scar_span = spec.scar_fraction * kTwoPi;
    scene.edema_start = rng.uniform(0.0, kTwoPi);
    scene.scar_start =
        Scene::wrap(scene.edema_start + 0.5 * (scene.edema_span - scene.scar_span));

    // Ground-truth misalignments for the non-CRI sequences: a dominant
    // translation plus per-point jitter, capped at the requested magnitude.
    const auto grid = tps::scale_control_grid(tps::make_control_grid(4, 256.0),
                                              n / 256.0, n / 256.0);
    auto draw_disp = [&](Rng& r) {
        tps::DisplacementSet d;
        d.frame_h = d.frame_w = n;
        d.deltas.assign(grid.points.size(), {0.0, 0.0});
        if (spec.misalign_magnitude > 0) {
            const double mag = spec.misalign_magnitude;
            const double t_norm = r.uniform(0.55, 0.85) * mag;
            const double t_ang = r.uniform(0.0, kTwoPi);
            const double tx = t_norm * std::cos(t_ang);
            const double ty = t_norm * std::sin(t_ang);
            for (auto& e : d.deltas) {
                const double j_norm = r.uniform(0.0, 0.25) * mag;
                const double j_ang = r.uniform(0.0, kTwoPi);
                double dx = tx + j_norm * std::cos(j_ang);
                double dy = ty + j_norm * std::sin(j_ang);
                const double norm = std::hypot(dx, dy);
                if (norm > mag) {
                    dx *= mag / norm;
                    dy *= mag / norm;
                }
                e = {dx, dy};
            }
        }
        return d;
    };

    PhantomSample sample;
    sample.slice.h = sample.slice.w = n;
    sample.slice.spacing = {spec.spacing_mm, spec.spacing_mm};
    sample.slice.cri = kSeqLge;
    sample.slice.source = "phantom:" + std::to_string(spec.seed);

    // 3x3 supersampling for intensities; labels are centre-sampled.
    constexpr int kSS = 3;
    constexpr double kSubStep = 1.0 / kSS;

    for (const std::string seq : {kSeqBssfp, kSeqLge, kSeqT2}) {
        const bool is_cri = seq == kSeqLge;
        tps::TpsCoefficients coeffs;
        if (!is_cri) {
            Rng sub = rng.fork(seq == kSeqBssfp ? 1 : 2);
            tps::DisplacementSet gt = draw_disp(sub);
            coeffs = tps::solve_tps(grid, gt);
            sample.gt_disp[seq] = std::move(gt);
        }

        ImageD img(n, n, 0.0);
        LabelMask lbl(n, n, 0);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                double sr = r, sc = c;
                if (!is_cri) {
                    // The source rendering satisfies warp(I_src, gt) == scene,
                    // so its content lives at the inverse-warped position.
                    const auto q = invert_warp(coeffs, r - ctr, c - ctr);
                    sr = q[0] + ctr;
                    sc = q[1] + ctr;
                }
                double acc = 0.0;
                for (int a = 0; a < kSS; ++a)
                    for (int b = 0; b < kSS; ++b) {
                        const double rr = sr + (a - (kSS - 1) * 0.5) * kSubStep;
                        const double cc = sc + (b - (kSS - 1) * 0.5) * kSubStep;
                        acc += intensity_of(seq, scene.label_at(rr, cc), spec.t2_blood_intensity, spec.myo_intensity);
                    }
                img(r, c) = acc / (kSS * kSS);
                lbl(r, c) = observed_label(seq, scene.label_at(sr, sc));
            }
        }
        if (spec.noise_sigma > 0) {
            Rng noise = rng.fork(seq == kSeqBssfp ? 11 : (seq == kSeqLge ? 12 : 13));
            for (double& v : img.raw()) v += spec.noise_sigma * noise.gaussian();
        }
        sample.slice.images[seq] = std::move(img);
        sample.slice.labels[seq] = std::move(lbl);
    }

    // Pathology gold standard directly in the common space.
    LabelMask gold(n, n, 0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const Label l = scene.label_at(r, c);
            if (l == SCAR || l == EDEMA) gold(r, c) = l;
        }
    sample.slice.gold_common = std::move(gold);
    return sample;
}

} // namespace umyops::data

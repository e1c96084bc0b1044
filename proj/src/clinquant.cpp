#include "umyops/quant/clinquant.hpp"

#include <cmath>

#include "umyops/core/errors.hpp"

namespace umyops::quant {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) {
    while (a < 0) a += kTwoPi;
    while (a >= kTwoPi) a -= kTwoPi;
    return a;
}

} // namespace

double pathology_size_pct(const MaskU8& path_mask, const MaskU8& wall_mask) {
    if (!path_mask.same_shape(wall_mask))
        throw InvalidArgument("pathology_size_pct: shape mismatch");
    long wall = 0, path = 0;
    for (size_t i = 0; i < wall_mask.size(); ++i) {
        wall += wall_mask.raw()[i] != 0;
        path += path_mask.raw()[i] != 0;
    }
    if (wall == 0) throw InvalidArgument("pathology_size_pct: empty myocardium");
    return 100.0 * static_cast<double>(path) / static_cast<double>(wall);
}

ChordSet build_chords(const MaskU8& wall_mask, const MaskU8& lv_mask) {
    if (!wall_mask.same_shape(lv_mask)) throw InvalidArgument("build_chords: shape mismatch");

    double sr = 0.0, sc = 0.0;
    long n_lv = 0;
    for (int r = 0; r < lv_mask.rows(); ++r)
        for (int c = 0; c < lv_mask.cols(); ++c)
            if (lv_mask(r, c)) {
                sr += r;
                sc += c;
                ++n_lv;
            }
    if (n_lv == 0)
        throw InvalidArgument("build_chords: LV centroid undeterminable (empty blood pool)");

    ChordSet out;
    out.lv_centroid = {sr / n_lv, sc / n_lv};
    out.sector_of = Array2D<int16_t>(wall_mask.rows(), wall_mask.cols(), -1);
    out.chords.resize(kNumChords);
    for (int i = 0; i < kNumChords; ++i) out.chords[i].sector_index = i;

    const double sector_width = kTwoPi / kNumChords;
    for (int r = 0; r < wall_mask.rows(); ++r) {
        for (int c = 0; c < wall_mask.cols(); ++c) {
            if (!wall_mask(r, c)) continue;
            const double ang =
                wrap_angle(std::atan2(c - out.lv_centroid[1], r - out.lv_centroid[0]));
            int s = static_cast<int>(ang / sector_width);
            if (s >= kNumChords) s = kNumChords - 1;  // guard the 2*pi boundary
            out.sector_of(r, c) = static_cast<int16_t>(s);
            out.chords[s].myocardium_pixels += 1;
            out.chords[s].empty = false;
        }
    }
    return out;
}

void fill_transmurality(ChordSet& chords, const MaskU8& scar_mask) {
    if (scar_mask.rows() != chords.sector_of.rows() || scar_mask.cols() != chords.sector_of.cols())
        throw InvalidArgument("fill_transmurality: shape mismatch");
    for (auto& ch : chords.chords) {
        ch.scar_pixels = 0;
        ch.transmurality_pct = 0.0;
    }
    chords.excluded_scar_pixels = 0;
    for (int r = 0; r < scar_mask.rows(); ++r)
        for (int c = 0; c < scar_mask.cols(); ++c) {
            if (!scar_mask(r, c)) continue;
            const int16_t s = chords.sector_of(r, c);
            if (s < 0) {
                ++chords.excluded_scar_pixels;  // scar outside the wall
                continue;
            }
            chords.chords[s].scar_pixels += 1;
        }
    for (auto& ch : chords.chords)
        if (ch.myocardium_pixels > 0)
            ch.transmurality_pct = 100.0 * ch.scar_pixels / ch.myocardium_pixels;
}

int count_transmural(const ChordSet& chords) {
    int n = 0;
    for (const auto& ch : chords.chords) n += ch.transmurality_pct > 50.0;
    return n;
}

int viability_bin(double pct) {
    if (pct <= 25.0) return 0;
    if (pct <= 50.0) return 1;
    if (pct <= 75.0) return 2;
    return 3;
}

std::array<int, 4> viability_bins(const ChordSet& chords) {
    std::array<int, 4> bins{0, 0, 0, 0};
    for (const auto& ch : chords.chords) ++bins[viability_bin(ch.transmurality_pct)];
    return bins;
}

MaskU8 nsd_segment(const ImageD& lge, const MaskU8& wall_mask, const MaskU8& remote_mask, int n) {
    if (lge.rows() != wall_mask.rows() || lge.cols() != wall_mask.cols() ||
        !wall_mask.same_shape(remote_mask))
        throw InvalidArgument("nsd_segment: shape mismatch");
    if (n < 1) throw InvalidArgument("nsd_segment: n must be at least 1");

    double sum = 0.0;
    long cnt = 0;
    for (int r = 0; r < lge.rows(); ++r)
        for (int c = 0; c < lge.cols(); ++c)
            if (remote_mask(r, c)) {
                sum += lge(r, c);
                ++cnt;
            }
    if (cnt < 10) throw InvalidArgument("nsd_segment: remote region too small to be reliable");
    const double mean = sum / cnt;
    double ss = 0.0;
    for (int r = 0; r < lge.rows(); ++r)
        for (int c = 0; c < lge.cols(); ++c)
            if (remote_mask(r, c)) ss += (lge(r, c) - mean) * (lge(r, c) - mean);
    const double sd = std::sqrt(ss / cnt);

    const double thr = mean + n * sd;
    MaskU8 out(lge.rows(), lge.cols(), 0);
    for (int r = 0; r < lge.rows(); ++r)
        for (int c = 0; c < lge.cols(); ++c)
            if (wall_mask(r, c) && lge(r, c) > thr) out(r, c) = 1;
    return out;
}

MaskU8 derive_remote(const ChordSet& chords, const MaskU8& wall_mask,
                     const MaskU8& pathology_mask, int min_pixels) {
    if (!wall_mask.same_shape(pathology_mask))
        throw InvalidArgument("derive_remote: shape mismatch");

    // pathology burden and centroid angle
    std::array<long, kNumChords> patho_per_sector{};
    double sr = 0.0, sc = 0.0;
    long n_path = 0;
    for (int r = 0; r < wall_mask.rows(); ++r)
        for (int c = 0; c < wall_mask.cols(); ++c)
            if (pathology_mask(r, c)) {
                const int16_t s = chords.sector_of(r, c);
                if (s >= 0) ++patho_per_sector[s];
                sr += r;
                sc += c;
                ++n_path;
            }

    double center_angle = 0.0;
    if (n_path > 0)
        center_angle = wrap_angle(std::atan2(sc / n_path - chords.lv_centroid[1],
                                             sr / n_path - chords.lv_centroid[0]));

    // clean sectors ranked by angular distance from the pathology centroid
    std::vector<std::pair<double, int>> ranked;
    const double width = kTwoPi / kNumChords;
    for (int s = 0; s < kNumChords; ++s) {
        if (patho_per_sector[s] > 0 || chords.chords[s].empty) continue;
        const double mid = (s + 0.5) * width;
        double d = std::fabs(wrap_angle(mid) - center_angle);
        if (d > kTwoPi / 2) d = kTwoPi - d;
        ranked.push_back({n_path > 0 ? -d : 0.0, s});  // farthest first
    }
    std::sort(ranked.begin(), ranked.end());

    MaskU8 remote(wall_mask.rows(), wall_mask.cols(), 0);
    int collected = 0;
    std::vector<bool> keep(kNumChords, false);
    for (const auto& [negd, s] : ranked) {
        keep[s] = true;
        collected += chords.chords[s].myocardium_pixels;
        if (collected >= min_pixels && n_path > 0) break;
    }
    for (int r = 0; r < wall_mask.rows(); ++r)
        for (int c = 0; c < wall_mask.cols(); ++c) {
            const int16_t s = chords.sector_of(r, c);
            if (s >= 0 && keep[s] && !pathology_mask(r, c)) remote(r, c) = 1;
        }
    return remote;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidArgument("pearson_r: need paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw metrics::UndefinedMetric("pearson_r: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

QuantReport quantify_slice(const data::LabelMask& mask, const MaskU8& lv_mask) {
    const MaskU8 wall = data::binary_any(mask, {data::MYO, data::SCAR, data::EDEMA});
    const MaskU8 scar = data::binary_of(mask, data::SCAR);
    const MaskU8 edema_union = data::binary_any(mask, {data::SCAR, data::EDEMA});

    QuantReport rep;
    rep.scar_size_pct = pathology_size_pct(scar, wall);
    rep.edema_size_pct = pathology_size_pct(edema_union, wall);

    ChordSet chords = build_chords(wall, lv_mask);
    fill_transmurality(chords, scar);
    rep.transmural_count = count_transmural(chords);
    rep.chord_bins = viability_bins(chords);
    return rep;
}

} // namespace umyops::quant

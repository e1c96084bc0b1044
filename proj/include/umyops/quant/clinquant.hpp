#ifndef UMYOPS_QUANT_CLINQUANT_HPP
#define UMYOPS_QUANT_CLINQUANT_HPP

#include <array>
#include <vector>

#include "umyops/core/array2d.hpp"
#include "umyops/data/labels.hpp"
#include "umyops/metrics/metrics.hpp"

namespace umyops::quant {

inline constexpr int kNumChords = 100;

struct Chord {
    int sector_index = 0;
    int myocardium_pixels = 0;      // wall pixels incl. pathology
    int scar_pixels = 0;
    double transmurality_pct = 0.0; // 0 when the chord has no wall pixels
    bool empty = true;
};

// 100 equal-angle sectors about the LV blood-pool centroid. sector_of maps
// every wall pixel to its sector (-1 elsewhere) so later passes reuse the
// same assignment.
struct ChordSet {
    std::vector<Chord> chords;              // exactly kNumChords
    std::array<double, 2> lv_centroid{0, 0};
    Array2D<int16_t> sector_of;
    int excluded_scar_pixels = 0;           // scar outside the wall, warned
};

// Pathology burden as a percentage of the LV myocardium; the denominator is
// the full wall (pathology pixels replace myocardium ones, so they count).
double pathology_size_pct(const MaskU8& path_mask, const MaskU8& wall_mask);

ChordSet build_chords(const MaskU8& wall_mask, const MaskU8& lv_mask);

// Per-chord scar percentage: (scar pixels / chord pixels) * 100.
void fill_transmurality(ChordSet& chords, const MaskU8& scar_mask);

// Strictly greater than 50%.
int count_transmural(const ChordSet& chords);

// Viability bins 0-25 / 26-50 / 51-75 / 76-100 (percent, upper-inclusive).
std::array<int, 4> viability_bins(const ChordSet& chords);
int viability_bin(double pct);

// Threshold segmentation at mean(remote) + n * stdev(remote), restricted to
// the wall. Throws when the remote region has fewer than 10 pixels.
MaskU8 nsd_segment(const ImageD& lge, const MaskU8& wall_mask, const MaskU8& remote_mask, int n);

// Remote myocardium, derived: wall pixels of zero-pathology sectors, keeping
// the sectors angularly farthest from the pathology centroid until at least
// min_pixels are collected.
MaskU8 derive_remote(const ChordSet& chords, const MaskU8& wall_mask,
                     const MaskU8& pathology_mask, int min_pixels = 30);

// Pearson correlation; throws UndefinedMetric on zero variance.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct QuantReport {
    double scar_size_pct = 0.0;
    double edema_size_pct = 0.0;
    int transmural_count = 0;
    std::array<int, 4> chord_bins{0, 0, 0, 0};
};

// Full quantification of one labelled slice in the common space. lv_mask
// localizes the blood pool for the chord geometry.
QuantReport quantify_slice(const data::LabelMask& mask, const MaskU8& lv_mask);

} // namespace umyops::quant

#endif

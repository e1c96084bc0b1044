#ifndef UMYOPS_DATA_SLICES_HPP
#define UMYOPS_DATA_SLICES_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umyops/data/labels.hpp"
#include "umyops/data/volume.hpp"

namespace umyops::data {

class EmptyOverlapError : public std::runtime_error {
public:
    explicit EmptyOverlapError(const std::string& what) : std::runtime_error(what) {}
};

// One training/inference unit: co-extracted 2D images of each sequence on a
// shared raster, per-sequence labels, and (when known) the pathology gold
// standard already in the common space.
struct MultiSeqSlice {
    int h = 0, w = 0;
    std::array<double, 2> spacing{1.0, 1.0};      // mm per pixel, (row, col)
    std::map<std::string, ImageD> images;
    std::map<std::string, LabelMask> labels;
    std::string cri = kSeqLge;
    std::optional<LabelMask> gold_common;
    std::string source;
    std::map<std::string, int> slice_index;       // per-sequence source slice

    bool consistent() const;
};

// Pre-align volumes into the CRI in-plane frame using header affines only:
// each non-CRI volume is resampled slice-by-slice onto the CRI pixel grid
// (same in-plane axes and spacing), keeping its own through-plane positions.
std::vector<SequenceVolume> rigid_prealign(const std::vector<SequenceVolume>& vols,
                                           const std::string& cri = kSeqLge);

// For every CRI slice inside the physical region imaged by all sequences,
// pick the source slices at the closest physical centre distance (ties break
// to the lower index). Volumes must already share the in-plane raster.
std::vector<MultiSeqSlice> pair_slices(const std::vector<SequenceVolume>& vols,
                                       const std::string& cri = kSeqLge);

// Crop around the heart (centre of mass of CRI myocardium when labels exist,
// image centre otherwise), resample to target_size at target_spacing, and
// Z-score each image over its crop.
MultiSeqSlice crop_resample_normalize(const MultiSeqSlice& slice, int target_size,
                                      double target_spacing_mm);

// Z-score in place; throws NumericError on (near-)constant images.
void zscore(ImageD& img);

} // namespace umyops::data

#endif

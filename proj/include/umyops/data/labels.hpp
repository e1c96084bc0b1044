#ifndef UMYOPS_DATA_LABELS_HPP
#define UMYOPS_DATA_LABELS_HPP

#include <array>
#include <initializer_list>

#include "umyops/core/array2d.hpp"

namespace umyops::data {

// Class codes shared by every mask in the pipeline.
enum Label : uint8_t { BG = 0, MYO = 1, LV = 2, RV = 3, SCAR = 4, EDEMA = 5 };
inline constexpr int kNumLabels = 6;

using LabelMask = MaskU8;

bool labels_valid(const LabelMask& m);

// 0/1 mask of one class.
MaskU8 binary_of(const LabelMask& m, Label code);

// 0/1 mask of any of the listed classes.
MaskU8 binary_any(const LabelMask& m, std::initializer_list<Label> codes);

// Anatomical channels for registration: pathology pixels count as myocardium.
// Returns {MYO+SCAR+EDEMA, LV, RV} as 0/1 images.
std::array<ImageD, 3> anatomy_onehot(const LabelMask& m);

// Combine per-sequence pathology delineations in the common space:
// scar wins on overlap, the rest keep their original class.
LabelMask merge_pathology_labels(const LabelMask& scar_in_cri, const LabelMask& edema_in_cri);

// Evaluation-time edema is the union of scar and edema: returns a mask where
// every SCAR pixel is relabelled EDEMA. Scar evaluation keeps using the input.
LabelMask edema_union_for_eval(const LabelMask& m);

} // namespace umyops::data

#endif

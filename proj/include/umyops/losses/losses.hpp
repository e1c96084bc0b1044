#ifndef UMYOPS_LOSSES_LOSSES_HPP
#define UMYOPS_LOSSES_LOSSES_HPP

#include <map>

#include "umyops/data/labels.hpp"
#include "umyops/nn/ops.hpp"

namespace umyops::losses {

struct LossConfig {
    double lambda_balance = 0.1;   // weight of the extraction/constraint terms
    double smooth_eps = 1e-5;

    void validate() const {
        if (!(lambda_balance >= 0.0)) throw InvalidArgument("LossConfig: bad lambda");
        if (!(smooth_eps > 0.0)) throw InvalidArgument("LossConfig: bad smoothing");
    }
};

// Smoothed soft Dice of a single-channel probability map against a 0/1 mask.
nn::Var soft_dice(const nn::Var& pred, const ImageD& target, double eps = 1e-5);
double soft_dice_value(const ImageD& pred, const ImageD& target, double eps = 1e-5);

// Multi-sequence registration loss: minus the per-sequence class-mean Dice of
// the warped anatomy one-hots (MYO, LV, RV channels) against the CRI one-hot.
nn::Var loss_reg(const std::map<std::string, nn::Var>& warped_anatomy,
                 const std::array<ImageD, 3>& cri_anatomy, double eps = 1e-5);

// Myocardium extraction loss on the CRI: -Dice(prediction, gold).
nn::Var loss_myo(const nn::Var& pred_myo_cri, const ImageD& gold_myo_cri, double eps = 1e-5);

// Constraint loss: -sum over non-CRI sequences of Dice in their own frames.
nn::Var loss_cons(const std::map<std::string, nn::Var>& pred_myo,
                  const std::map<std::string, ImageD>& gold_myo, double eps = 1e-5);

// reg + lambda * (cons + myo)
nn::Var loss_hybrid(const nn::Var& reg, const nn::Var& cons, const nn::Var& myo,
                    const LossConfig& cfg);

// Pathology loss: -(mean Dice over EDEMA and SCAR softmax channels) + CE over
// all pixels. gold carries only {BG, EDEMA, SCAR}.
nn::Var loss_pathology(const nn::Var& logits, const data::LabelMask& gold_merged,
                       double eps = 1e-5);

// Class-index map (0 BG, 1 EDEMA, 2 SCAR) from a merged pathology mask.
MaskU8 pathology_targets(const data::LabelMask& gold_merged);

} // namespace umyops::losses

#endif

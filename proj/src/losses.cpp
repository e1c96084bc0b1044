#include "umyops/losses/losses.hpp"

#include "umyops/nn/model.hpp"

namespace umyops::losses {

using nn::Var;

Var soft_dice(const Var& pred, const ImageD& target, double eps) {
    if (pred->val.c != 1) throw InvalidArgument("soft_dice: expected a single-channel map");
    return nn::soft_dice_score(pred, 0, target, eps);
}

double soft_dice_value(const ImageD& pred, const ImageD& target, double eps) {
    if (!pred.same_shape(target)) throw InvalidArgument("soft_dice_value: shape mismatch");
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        inter += pred.raw()[i] * target.raw()[i];
        sp += pred.raw()[i];
        st += target.raw()[i];
    }
    return (2.0 * inter + eps) / (sp + st + eps);
}

Var loss_reg(const std::map<std::string, Var>& warped_anatomy,
             const std::array<ImageD, 3>& cri_anatomy, double eps) {
    if (warped_anatomy.empty()) throw InvalidArgument("loss_reg: no sequences");
    Var total;
    for (const auto& [seq, warped] : warped_anatomy) {
        if (warped->val.c != 3) throw InvalidArgument("loss_reg: expected 3 anatomy channels");
        Var mean_dice;
        for (int cls = 0; cls < 3; ++cls) {
            const Var d = nn::soft_dice_score(warped, cls, cri_anatomy[cls], eps);
            mean_dice = mean_dice ? nn::add(mean_dice, d) : d;
        }
        mean_dice = nn::scale(mean_dice, 1.0f / 3.0f);
        total = total ? nn::add(total, mean_dice) : mean_dice;
    }
    return nn::scale(total, -1.0f);
}

Var loss_myo(const Var& pred_myo_cri, const ImageD& gold_myo_cri, double eps) {
    return nn::scale(soft_dice(pred_myo_cri, gold_myo_cri, eps), -1.0f);
}

Var loss_cons(const std::map<std::string, Var>& pred_myo,
              const std::map<std::string, ImageD>& gold_myo, double eps) {
    if (pred_myo.empty()) throw InvalidArgument("loss_cons: no sequences");
    Var total;
    for (const auto& [seq, pred] : pred_myo) {
        const auto it = gold_myo.find(seq);
        if (it == gold_myo.end()) throw InvalidArgument("loss_cons: missing gold for " + seq);
        const Var d = soft_dice(pred, it->second, eps);
        total = total ? nn::add(total, d) : d;
    }
    return nn::scale(total, -1.0f);
}

Var loss_hybrid(const Var& reg, const Var& cons, const Var& myo, const LossConfig& cfg) {
    cfg.validate();
    return nn::add(reg, nn::scale(nn::add(cons, myo), static_cast<float>(cfg.lambda_balance)));
}

MaskU8 pathology_targets(const data::LabelMask& gold_merged) {
    MaskU8 t(gold_merged.rows(), gold_merged.cols(), 0);
    for (size_t i = 0; i < t.size(); ++i) {
        switch (gold_merged.raw()[i]) {
            case data::BG: t.raw()[i] = nn::kClassBg; break;
            case data::EDEMA: t.raw()[i] = nn::kClassEdema; break;
            case data::SCAR: t.raw()[i] = nn::kClassScar; break;
            default:
                throw InvalidArgument("pathology gold contains classes other than BG/EDEMA/SCAR");
        }
    }
    return t;
}

Var loss_pathology(const Var& logits, const data::LabelMask& gold_merged, double eps) {
    if (logits->val.c != nn::kPathologyClasses)
        throw InvalidArgument("loss_pathology: expected 3-class logits");
    const MaskU8 targets = pathology_targets(gold_merged);

    const Var probs = nn::softmax(logits);
    ImageD edema_t(gold_merged.rows(), gold_merged.cols(), 0.0);
    ImageD scar_t(gold_merged.rows(), gold_merged.cols(), 0.0);
    for (size_t i = 0; i < targets.size(); ++i) {
        if (targets.raw()[i] == nn::kClassEdema) edema_t.raw()[i] = 1.0;
        if (targets.raw()[i] == nn::kClassScar) scar_t.raw()[i] = 1.0;
    }
    // foreground-class mean Dice; CE runs over all classes including BG
    const Var dice_fg = nn::scale(nn::add(nn::soft_dice_score(probs, nn::kClassEdema, edema_t, eps),
                                          nn::soft_dice_score(probs, nn::kClassScar, scar_t, eps)),
                                  0.5f);
    const Var ce = nn::softmax_cross_entropy(logits, targets);
    return nn::add(nn::scale(dice_fg, -1.0f), ce);
}

} // namespace umyops::losses

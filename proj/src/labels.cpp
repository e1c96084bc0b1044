#include "umyops/data/labels.hpp"

namespace umyops::data {

bool labels_valid(const LabelMask& m) {
    for (const auto v : m.raw())
        if (v >= kNumLabels) return false;
    return true;
}

MaskU8 binary_of(const LabelMask& m, Label code) {
    MaskU8 out(m.rows(), m.cols(), 0);
    for (size_t i = 0; i < m.size(); ++i) out.raw()[i] = m.raw()[i] == code ? 1 : 0;
    return out;
}

MaskU8 binary_any(const LabelMask& m, std::initializer_list<Label> codes) {
    MaskU8 out(m.rows(), m.cols(), 0);
    for (size_t i = 0; i < m.size(); ++i) {
        for (const Label c : codes) {
            if (m.raw()[i] == c) {
                out.raw()[i] = 1;
                break;
            }
        }
    }
    return out;
}

std::array<ImageD, 3> anatomy_onehot(const LabelMask& m) {
    std::array<ImageD, 3> chans{ImageD(m.rows(), m.cols(), 0.0),
                                ImageD(m.rows(), m.cols(), 0.0),
                                ImageD(m.rows(), m.cols(), 0.0)};
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            switch (m(r, c)) {
                case MYO:
                case SCAR:
                case EDEMA: chans[0](r, c) = 1.0; break;
                case LV: chans[1](r, c) = 1.0; break;
                case RV: chans[2](r, c) = 1.0; break;
                default: break;
            }
        }
    }
    return chans;
}

LabelMask merge_pathology_labels(const LabelMask& scar_in_cri, const LabelMask& edema_in_cri) {
    if (!scar_in_cri.same_shape(edema_in_cri))
        throw InvalidArgument("merge_pathology_labels: shape mismatch");
    LabelMask out(scar_in_cri.rows(), scar_in_cri.cols(), BG);
    for (size_t i = 0; i < out.size(); ++i) {
        if (scar_in_cri.raw()[i] == SCAR)
            out.raw()[i] = SCAR;
        else if (edema_in_cri.raw()[i] == EDEMA)
            out.raw()[i] = EDEMA;
    }
    return out;
}

LabelMask edema_union_for_eval(const LabelMask& m) {
    LabelMask out = m;
    for (auto& v : out.raw())
        if (v == SCAR) v = EDEMA;
    return out;
}

} // namespace umyops::data

#include "umyops/data/slices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace umyops::data {

namespace {

const SequenceVolume& find_vol(const std::vector<SequenceVolume>& vols, const std::string& id) {
    for (const auto& v : vols)
        if (v.sequence_id == id) return v;
    throw InvalidArgument("volume set is missing sequence " + id);
}

double bilinear_at(const ImageD& img, double r, double c) {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    double acc = 0.0;
    for (int dr = 0; dr <= 1; ++dr)
        for (int dc = 0; dc <= 1; ++dc) {
            const int rr = r0 + dr, cc = c0 + dc;
            if (!img.in_bounds(rr, cc)) continue;
            const double wr = dr == 0 ? 1.0 - (r - r0) : (r - r0);
            const double wc = dc == 0 ? 1.0 - (c - c0) : (c - c0);
            acc += wr * wc * img(rr, cc);
        }
    return acc;
}

uint8_t nearest_label_at(const LabelMask& m, double r, double c) {
    const int rr = static_cast<int>(std::lround(r));
    const int cc = static_cast<int>(std::lround(c));
    return m.in_bounds(rr, cc) ? m(rr, cc) : 0;
}

} // namespace

bool MultiSeqSlice::consistent() const {
    if (h <= 0 || w <= 0) return false;
    if (images.find(cri) == images.end()) return false;
    for (const auto& [id, img] : images)
        if (img.rows() != h || img.cols() != w) return false;
    for (const auto& [id, m] : labels)
        if (m.rows() != h || m.cols() != w) return false;
    if (gold_common && (gold_common->rows() != h || gold_common->cols() != w)) return false;
    return true;
}

std::vector<SequenceVolume> rigid_prealign(const std::vector<SequenceVolume>& vols,
                                           const std::string& cri) {
    const SequenceVolume& ref = find_vol(vols, cri);
    if (!ref.valid()) throw InvalidArgument("rigid_prealign: invalid CRI volume");
    const Eigen::Vector3d ei = ref.affine.block<3, 1>(0, 0);
    const Eigen::Vector3d ej = ref.affine.block<3, 1>(0, 1);
    const Eigen::Vector3d ref_origin = ref.affine.block<3, 1>(0, 3);
    const Eigen::Vector3d normal = ref.slice_normal();

    std::vector<SequenceVolume> out;
    out.reserve(vols.size());
    for (const auto& src : vols) {
        if (!src.valid()) throw InvalidArgument("rigid_prealign: invalid volume " + src.sequence_id);
        if (src.sequence_id == cri) {
            out.push_back(src);
            continue;
        }

        SequenceVolume dst;
        dst.nx = ref.nx;
        dst.ny = ref.ny;
        dst.nz = src.nz;
        dst.spacing = {ref.spacing[0], ref.spacing[1], src.spacing[2]};
        dst.sequence_id = src.sequence_id;
        dst.source = src.source;
        dst.voxels.assign(static_cast<size_t>(dst.nx) * dst.ny * dst.nz, 0.0);
        if (src.labels) dst.labels.emplace(dst.voxels.size(), 0);

        // In-plane mapping from source pixel frame to physical coordinates.
        const Eigen::Vector3d si = src.affine.block<3, 1>(0, 0);
        const Eigen::Vector3d sj = src.affine.block<3, 1>(0, 1);
        Eigen::Matrix2d gram;
        gram << si.dot(si), si.dot(sj), sj.dot(si), sj.dot(sj);
        if (std::fabs(gram.determinant()) < 1e-12)
            throw NumericError("rigid_prealign: degenerate in-plane affine");
        const Eigen::Matrix2d gram_inv = gram.inverse();

        // New affine: CRI in-plane axes, source through-plane step; origin
        // keeps the CRI in-plane anchor and the source's out-of-plane offset.
        const Eigen::Vector3d src_origin = src.affine.block<3, 1>(0, 3);
        const Eigen::Vector3d plane0_origin =
            ref_origin + normal * normal.dot(src_origin - ref_origin);
        const double kstep = normal.dot(src.affine.block<3, 1>(0, 2));
        dst.affine = Eigen::Matrix4d::Identity();
        dst.affine.block<3, 1>(0, 0) = ei;
        dst.affine.block<3, 1>(0, 1) = ej;
        dst.affine.block<3, 1>(0, 2) = normal * kstep;
        dst.affine.block<3, 1>(0, 3) = plane0_origin;

        for (int k = 0; k < src.nz; ++k) {
            const Eigen::Vector3d slice_origin =
                src_origin + src.affine.block<3, 1>(0, 2) * static_cast<double>(k);
            const ImageD img = src.slice_image(k);
            LabelMask lbl;
            if (src.labels) lbl = src.slice_labels(k);
            const Eigen::Vector3d dst_slice_origin =
                plane0_origin + dst.affine.block<3, 1>(0, 2) * static_cast<double>(k);
            for (int j = 0; j < dst.ny; ++j) {
                for (int i = 0; i < dst.nx; ++i) {
                    const Eigen::Vector3d q = dst_slice_origin + ei * i + ej * j;
                    const Eigen::Vector3d rel = q - slice_origin;
                    const Eigen::Vector2d uv = gram_inv * Eigen::Vector2d(si.dot(rel), sj.dot(rel));
                    dst.at(i, j, k) = bilinear_at(img, uv[1], uv[0]);
                    if (src.labels)
                        (*dst.labels)[dst.idx(i, j, k)] = nearest_label_at(lbl, uv[1], uv[0]);
                }
            }
        }
        out.push_back(std::move(dst));
    }
    return out;
}

std::vector<MultiSeqSlice> pair_slices(const std::vector<SequenceVolume>& vols,
                                       const std::string& cri) {
    const SequenceVolume& ref = find_vol(vols, cri);
    const Eigen::Vector3d normal = ref.slice_normal();

    // Physical extent of each volume along the CRI normal, padded by half a
    // slice step so boundary slices still count as imaged.
    struct Range { double lo, hi; };
    auto coverage = [&](const SequenceVolume& v) -> Range {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int k = 0; k < v.nz; ++k) {
            const double z = normal.dot(v.slice_center(k));
            lo = std::min(lo, z);
            hi = std::max(hi, z);
        }
        const double margin = 0.5 * std::fabs(normal.dot(v.affine.block<3, 1>(0, 2)));
        return {lo - margin, hi + margin};
    };

    Range common{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& v : vols) {
        const Range r = coverage(v);
        common.lo = std::max(common.lo, r.lo);
        common.hi = std::min(common.hi, r.hi);
    }
    if (common.lo > common.hi)
        throw EmptyOverlapError("pair_slices: sequences share no physical region");

    std::vector<MultiSeqSlice> out;
    for (int k = 0; k < ref.nz; ++k) {
        const Eigen::Vector3d c_ref = ref.slice_center(k);
        const double z = normal.dot(c_ref);
        if (z < common.lo || z > common.hi) continue;

        MultiSeqSlice slice;
        slice.h = ref.ny;
        slice.w = ref.nx;
        slice.spacing = {ref.spacing[1], ref.spacing[0]};
        slice.cri = cri;
        slice.source = ref.source;
        slice.images[cri] = ref.slice_image(k);
        if (ref.labels) slice.labels[cri] = ref.slice_labels(k);
        slice.slice_index[cri] = k;

        bool ok = true;
        for (const auto& v : vols) {
            if (v.sequence_id == cri) continue;
            if (v.nx != ref.nx || v.ny != ref.ny)
                throw InvalidArgument("pair_slices: volumes not on a shared raster; run rigid_prealign first");
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (int kk = 0; kk < v.nz; ++kk) {
                const double d = (v.slice_center(kk) - c_ref).norm();
                if (d < best_d - 1e-9) {  // strict improvement; ties keep the lower index
                    best_d = d;
                    best = kk;
                }
            }
            if (best < 0) {
                ok = false;
                break;
            }
            slice.images[v.sequence_id] = v.slice_image(best);
            if (v.labels) slice.labels[v.sequence_id] = v.slice_labels(best);
            slice.slice_index[v.sequence_id] = best;
        }
        if (ok) out.push_back(std::move(slice));
    }
    if (out.empty()) throw EmptyOverlapError("pair_slices: no slices inside the common region");
    return out;
}

void zscore(ImageD& img) {
    double mean = 0.0;
    for (const double v : img.raw()) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (const double v : img.raw()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.size());
    if (var < 1e-20) throw NumericError("zscore: zero-variance image");
    const double inv_sd = 1.0 / std::sqrt(var);
    for (double& v : img.raw()) v = (v - mean) * inv_sd;
}

MultiSeqSlice crop_resample_normalize(const MultiSeqSlice& slice, int target_size,
                                      double target_spacing_mm) {
    if (!slice.consistent()) throw InvalidArgument("crop_resample_normalize: inconsistent slice");
    if (target_size <= 0 || target_spacing_mm <= 0)
        throw InvalidArgument("crop_resample_normalize: bad target");

    // Heart centre: centre of mass of the CRI myocardium (incl. pathology)
    // when labels exist; the image centre otherwise.
    double cr = 0.5 * (slice.h - 1), cc = 0.5 * (slice.w - 1);
    const auto it = slice.labels.find(slice.cri);
    if (it != slice.labels.end()) {
        const MaskU8 myo = binary_any(it->second, {MYO, SCAR, EDEMA});
        long count = 0;
        double sr = 0.0, sc = 0.0;
        for (int r = 0; r < myo.rows(); ++r)
            for (int c = 0; c < myo.cols(); ++c)
                if (myo(r, c)) {
                    sr += r;
                    sc += c;
                    ++count;
                }
        if (count > 0) {
            cr = sr / count;
            cc = sc / count;
        }
    }

    const double step_r = target_spacing_mm / slice.spacing[0];
    const double step_c = target_spacing_mm / slice.spacing[1];
    const double half = 0.5 * (target_size - 1);

    MultiSeqSlice out;
    out.h = out.w = target_size;
    out.spacing = {target_spacing_mm, target_spacing_mm};
    out.cri = slice.cri;
    out.source = slice.source;
    out.slice_index = slice.slice_index;

    auto src_pos = [&](int r, int c) {
        return std::array<double, 2>{cr + (r - half) * step_r, cc + (c - half) * step_c};
    };

    for (const auto& [id, img] : slice.images) {
        ImageD res(target_size, target_size);
        for (int r = 0; r < target_size; ++r)
            for (int c = 0; c < target_size; ++c) {
                const auto p = src_pos(r, c);
                res(r, c) = bilinear_at(img, p[0], p[1]);
            }
        zscore(res);
        out.images[id] = std::move(res);
    }
    for (const auto& [id, m] : slice.labels) {
        LabelMask res(target_size, target_size, 0);
        for (int r = 0; r < target_size; ++r)
            for (int c = 0; c < target_size; ++c) {
                const auto p = src_pos(r, c);
                res(r, c) = nearest_label_at(m, p[0], p[1]);
            }
        out.labels[id] = std::move(res);
    }
    if (slice.gold_common) {
        LabelMask res(target_size, target_size, 0);
        for (int r = 0; r < target_size; ++r)
            for (int c = 0; c < target_size; ++c) {
                const auto p = src_pos(r, c);
                res(r, c) = nearest_label_at(*slice.gold_common, p[0], p[1]);
            }
        out.gold_common = std::move(res);
    }
    return out;
}

} // namespace umyops::data

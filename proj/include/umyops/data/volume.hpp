#ifndef UMYOPS_DATA_VOLUME_HPP
#define UMYOPS_DATA_VOLUME_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umyops/core/array2d.hpp"
#include "umyops/data/labels.hpp"

namespace umyops::data {

inline constexpr const char* kSeqBssfp = "bSSFP";
inline constexpr const char* kSeqLge = "LGE";
inline constexpr const char* kSeqT2 = "T2";

// One acquired CMR volume: voxels in i-fastest order, a voxel-to-physical
// affine, and optional voxel-aligned labels.
struct SequenceVolume {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> voxels;                   // nx*ny*nz, index i + j*nx + k*nx*ny
    Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm
    std::string sequence_id;
    std::optional<std::vector<uint8_t>> labels;
    std::string source;

    double& at(int i, int j, int k) { return voxels[idx(i, j, k)]; }
    double at(int i, int j, int k) const { return voxels[idx(i, j, k)]; }
    size_t idx(int i, int j, int k) const {
        return static_cast<size_t>(i) + static_cast<size_t>(j) * nx +
               static_cast<size_t>(k) * nx * ny;
    }

    bool valid() const;

    // 2D view of slice k: rows follow j, cols follow i.
    ImageD slice_image(int k) const;
    LabelMask slice_labels(int k) const;

    // Physical position of the slice centre (pixel (nx-1)/2, (ny-1)/2, k).
    Eigen::Vector3d slice_center(int k) const;

    // Unit normal of the slice planes (affine k column, normalized).
    Eigen::Vector3d slice_normal() const;
};

// Minimal NIfTI-1 (.nii, uncompressed) reader. Supports uint8/int16/int32/
// float32/float64 payloads, sform or qform orientation, scl_slope/inter.
SequenceVolume read_nifti(const std::string& path, const std::string& sequence_id);

} // namespace umyops::data

#endif

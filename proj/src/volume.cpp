#include "umyops/data/volume.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "umyops/core/errors.hpp"

namespace umyops::data {

bool SequenceVolume::valid() const {
    if (nx <= 0 || ny <= 0 || nz <= 0) return false;
    if (voxels.size() != static_cast<size_t>(nx) * ny * nz) return false;
    if (spacing[0] <= 0 || spacing[1] <= 0 || spacing[2] <= 0) return false;
    if (std::fabs(affine.block<3, 3>(0, 0).determinant()) < 1e-12) return false;
    return true;
}

ImageD SequenceVolume::slice_image(int k) const {
    ImageD img(ny, nx);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) img(j, i) = at(i, j, k);
    return img;
}

LabelMask SequenceVolume::slice_labels(int k) const {
    if (!labels) throw InvalidArgument("slice_labels: volume has no labels");
    LabelMask m(ny, nx, 0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) m(j, i) = (*labels)[idx(i, j, k)];
    return m;
}

Eigen::Vector3d SequenceVolume::slice_center(int k) const {
    Eigen::Vector4d v(0.5 * (nx - 1), 0.5 * (ny - 1), static_cast<double>(k), 1.0);
    return (affine * v).head<3>();
}

Eigen::Vector3d SequenceVolume::slice_normal() const {
    Eigen::Vector3d n = affine.block<3, 1>(0, 2);
    const double len = n.norm();
    if (len < 1e-12) throw NumericError("slice_normal: degenerate affine");
    return n / len;
}

namespace {

template <typename T>
T read_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

Eigen::Matrix4d affine_from_quaternion(float b, float c, float d, float qx, float qy,
                                       float qz, const float pixdim[8]) {
    double a2 = 1.0 - (double(b) * b + double(c) * c + double(d) * d);
    const double a = a2 > 0 ? std::sqrt(a2) : 0.0;
    Eigen::Matrix3d R;
    R << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
        2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
        2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c;
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
    A.block<3, 1>(0, 0) = R.col(0) * pixdim[1];
    A.block<3, 1>(0, 1) = R.col(1) * pixdim[2];
    A.block<3, 1>(0, 2) = R.col(2) * pixdim[3] * qfac;
    A(0, 3) = qx;
    A(1, 3) = qy;
    A(2, 3) = qz;
    return A;
}

} // namespace

SequenceVolume read_nifti(const std::string& path, const std::string& sequence_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_nifti: cannot open " + path);
    std::vector<char> hdr(352);
    in.read(hdr.data(), 352);
    if (!in) throw IoError("read_nifti: truncated header in " + path);

    const int32_t sizeof_hdr = read_le<int32_t>(hdr.data());
    if (sizeof_hdr != 348) throw IoError("read_nifti: not a NIfTI-1 file (sizeof_hdr)");
    if (std::strncmp(hdr.data() + 344, "n+1", 3) != 0 && std::strncmp(hdr.data() + 344, "ni1", 3) != 0)
        throw IoError("read_nifti: bad magic");

    int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = read_le<int16_t>(hdr.data() + 40 + 2 * i);
    if (dim[0] < 2 || dim[0] > 4) throw IoError("read_nifti: only 2D/3D volumes supported");
    const int nx = dim[1], ny = dim[2], nz = dim[0] >= 3 ? dim[3] : 1;
    if (dim[0] == 4 && dim[4] > 1) throw IoError("read_nifti: time series not supported; extract one frame");

    const int16_t datatype = read_le<int16_t>(hdr.data() + 70);
    float pixdim[8];
    for (int i = 0; i < 8; ++i) pixdim[i] = read_le<float>(hdr.data() + 76 + 4 * i);
    const float vox_offset = read_le<float>(hdr.data() + 108);
    float scl_slope = read_le<float>(hdr.data() + 112);
    const float scl_inter = read_le<float>(hdr.data() + 116);
    if (scl_slope == 0.0f) scl_slope = 1.0f;

    const int16_t qform_code = read_le<int16_t>(hdr.data() + 252);
    const int16_t sform_code = read_le<int16_t>(hdr.data() + 254);

    Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
    if (sform_code > 0) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) affine(r, c) = read_le<float>(hdr.data() + 280 + (r * 4 + c) * 4);
    } else if (qform_code > 0) {
        affine = affine_from_quaternion(read_le<float>(hdr.data() + 256), read_le<float>(hdr.data() + 260),
                                        read_le<float>(hdr.data() + 264), read_le<float>(hdr.data() + 268),
                                        read_le<float>(hdr.data() + 272), read_le<float>(hdr.data() + 276),
                                        pixdim);
    } else {
        affine(0, 0) = pixdim[1];
        affine(1, 1) = pixdim[2];
        affine(2, 2) = pixdim[3];
    }

    SequenceVolume vol;
    vol.nx = nx;
    vol.ny = ny;
    vol.nz = nz;
    vol.affine = affine;
    vol.spacing = {std::fabs(pixdim[1]), std::fabs(pixdim[2]), std::fabs(pixdim[3])};
    vol.sequence_id = sequence_id;
    vol.source = path;

    const size_t n = static_cast<size_t>(nx) * ny * nz;
    vol.voxels.resize(n);
    in.seekg(static_cast<std::streamoff>(vox_offset));

    auto load = [&](auto tag) {
        using S = decltype(tag);
        std::vector<S> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(S)));
        if (!in) throw IoError("read_nifti: truncated voxel data in " + path);
        for (size_t i = 0; i < n; ++i)
            vol.voxels[i] = static_cast<double>(buf[i]) * scl_slope + scl_inter;
    };
    switch (datatype) {
        case 2: load(uint8_t{}); break;
        case 4: load(int16_t{}); break;
        case 8: load(int32_t{}); break;
        case 16: load(float{}); break;
        case 64: load(double{}); break;
        default: throw IoError("read_nifti: unsupported datatype " + std::to_string(datatype));
    }
    if (!vol.valid()) throw IoError("read_nifti: inconsistent geometry in " + path);
    return vol;
}

} // namespace umyops::data

#ifndef UMYOPS_TPS_TPS_HPP
#define UMYOPS_TPS_TPS_HPP

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "umyops/core/array2d.hpp"
#include "umyops/core/errors.hpp"

namespace umyops::tps {

// Coordinate convention used throughout: a frame of R rows by C cols has its
// origin at the image centre, with x = row - (R-1)/2 and y = col - (C-1)/2,
// both in pixels of that frame. The canonical frame is 256x256; control-point
// coordinates and predicted displacements live there and are rescaled to
// other frames on entry/exit.

struct ControlGrid {
    int m = 0;                                    // points per axis
    double extent = 0.0;                          // frame extent the coords live in
    std::vector<std::array<double, 2>> points;    // m*m entries, row-major (x outer, y inner)

    int count() const { return static_cast<int>(points.size()); }
};

struct DisplacementSet {
    std::vector<std::array<double, 2>> deltas;    // (dx, dy) per control point, pixels
    double frame_h = 0.0;                         // pixel dimensions the deltas are expressed in
    double frame_w = 0.0;
};

// Closed-form spline coefficients. The affine block is in position form
// (zero displacements give the identity map), the radial weights obey the
// usual side conditions: they sum to zero with zero first moments.
struct TpsCoefficients {
    std::array<double, 6> affine{};               // x' = a[0]+a[1]x+a[2]y ; y' = a[3]+a[4]x+a[5]y
    std::vector<std::array<double, 2>> rbf_weights;
    ControlGrid sources;

    bool finite() const;
};

enum class Interp { Bilinear, Nearest };

// Equally spaced grid; m=4 at extent 256 reproduces the reference axis
// coordinates 256*(-0.98 + 0.65*n). Other m keep the same endpoints.
ControlGrid make_control_grid(int m, double canonical_extent);

ControlGrid scale_control_grid(const ControlGrid& g, double sx, double sy);

// Feature-scale parameter adjustment: (dx, dy) -> (dx*h/H, dy*w/W).
DisplacementSet rescale_displacements(const DisplacementSet& d, double H, double W,
                                      double h, double w);

// Interpolating spline through the displaced control points. Throws
// NumericError when the kernel system is singular (duplicate points).
TpsCoefficients solve_tps(const ControlGrid& grid, const DisplacementSet& disp);

// Mapped position of (x, y) under the spline.
std::array<double, 2> evaluate(const TpsCoefficients& coeffs, double x, double y);

// Backward warp: out(p) = img(T(p)), zero fill outside the source raster.
ImageD warp_image(const ImageD& img, const TpsCoefficients& coeffs, Interp interp);

MaskU8 warp_label_nearest(const MaskU8& mask, const TpsCoefficients& coeffs);

// The sampling positions of an h x w raster are affine in the displacements:
//   pos_x(p) = x_p + B(p,:) . dx    pos_y(p) = y_p + B(p,:) . dy
// with one shared basis matrix B. Precomputing B makes repeated warps under
// the same grid cheap and gives exact analytic gradients in the displacements.
struct WarpBasis {
    int h = 0, w = 0;
    ControlGrid grid;
    Eigen::MatrixXd basis;                        // (h*w) x m^2
};

WarpBasis make_warp_basis(const ControlGrid& grid, int h, int w);

// out(p) = img(x_p + B dx, y_p + B dy); deltas in the raster's own frame.
ImageD warp_with_basis(const ImageD& img, const WarpBasis& basis,
                       const std::vector<std::array<double, 2>>& deltas, Interp interp);

// Vector-Jacobian products of warp_with_basis (bilinear path). d_deltas gets
// dL/d(dx_k), dL/d(dy_k); d_img, when non-null, accumulates dL/d(img).
void warp_vjp(const ImageD& img, const WarpBasis& basis,
              const std::vector<std::array<double, 2>>& deltas,
              const ImageD& d_out,
              std::vector<std::array<double, 2>>& d_deltas,
              ImageD* d_img);

} // namespace umyops::tps

#endif

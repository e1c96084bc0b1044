#include "umyops/tps/tps.hpp"

#include <cmath>

namespace umyops::tps {

namespace {

// U(r) = r^2 log r^2 expressed on the squared distance, U(0) = 0.
inline double kernel_sq(double d2) {
    return d2 > 0.0 ? d2 * std::log(d2) : 0.0;
}

inline double sq(double v) { return v * v; }

// Full Bookstein system [[K P],[P^T 0]] for the grid; (n+3) x (n+3).
Eigen::MatrixXd kernel_system(const ControlGrid& grid) {
    const int n = grid.count();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + 3, n + 3);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d2 = sq(grid.points[i][0] - grid.points[j][0]) +
                              sq(grid.points[i][1] - grid.points[j][1]);
            const double u = kernel_sq(d2);
            K(i, j) = u;
            K(j, i) = u;
        }
        K(i, n) = 1.0;
        K(i, n + 1) = grid.points[i][0];
        K(i, n + 2) = grid.points[i][1];
        K(n, i) = 1.0;
        K(n + 1, i) = grid.points[i][0];
        K(n + 2, i) = grid.points[i][1];
    }
    return K;
}

inline void check_grid_disp(const ControlGrid& grid, const DisplacementSet& disp) {
    if (static_cast<int>(disp.deltas.size()) != grid.count())
        throw InvalidArgument("solve_tps: displacement count does not match grid");
}

struct BilinearSample {
    double value = 0.0;
    double gx = 0.0;   // d value / d x (row direction)
    double gy = 0.0;
};

// Zero fill outside the raster; gradient of the zero-extended interpolant.
inline BilinearSample sample_bilinear(const ImageD& img, double x, double y) {
    const double r = x + 0.5 * (img.rows() - 1);
    const double c = y + 0.5 * (img.cols() - 1);
    const double rf = std::floor(r);
    const double cf = std::floor(c);
    const int r0 = static_cast<int>(rf);
    const int c0 = static_cast<int>(cf);
    const double fr = r - rf;
    const double fc = c - cf;

    auto at = [&](int rr, int cc) -> double {
        return img.in_bounds(rr, cc) ? img(rr, cc) : 0.0;
    };
    const double v00 = at(r0, c0);
    const double v01 = at(r0, c0 + 1);
    const double v10 = at(r0 + 1, c0);
    const double v11 = at(r0 + 1, c0 + 1);

    BilinearSample s;
    s.value = (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11);
    s.gx = (1.0 - fc) * (v10 - v00) + fc * (v11 - v01);
    s.gy = (1.0 - fr) * (v01 - v00) + fr * (v11 - v10);
    return s;
}

inline double sample_nearest(const ImageD& img, double x, double y) {
    const int r = static_cast<int>(std::lround(x + 0.5 * (img.rows() - 1)));
    const int c = static_cast<int>(std::lround(y + 0.5 * (img.cols() - 1)));
    return img.in_bounds(r, c) ? img(r, c) : 0.0;
}

} // namespace

bool TpsCoefficients::finite() const {
    for (double a : affine)
        if (!std::isfinite(a)) return false;
    for (const auto& w : rbf_weights)
        if (!std::isfinite(w[0]) || !std::isfinite(w[1])) return false;
    return true;
}

ControlGrid make_control_grid(int m, double canonical_extent) {
    if (m < 2) throw InvalidArgument("make_control_grid: need at least 2 points per axis");
    if (!(canonical_extent > 0.0)) throw InvalidArgument("make_control_grid: extent must be positive");

    // p_n = extent * (-0.98 + step*n) with step chosen so the endpoints match
    // the m=4 reference layout (step 0.65) for every m.
    const double step = 1.95 / (m - 1);
    std::vector<double> axis(m);
    for (int n = 0; n < m; ++n) axis[n] = canonical_extent * (-0.98 + step * n);

    ControlGrid g;
    g.m = m;
    g.extent = canonical_extent;
    g.points.reserve(static_cast<size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            g.points.push_back({axis[i], axis[j]});
    return g;
}

ControlGrid scale_control_grid(const ControlGrid& g, double sx, double sy) {
    if (!(sx > 0.0) || !(sy > 0.0)) throw InvalidArgument("scale_control_grid: scale must be positive");
    ControlGrid out = g;
    out.extent = g.extent * sx;
    for (auto& p : out.points) {
        p[0] *= sx;
        p[1] *= sy;
    }
    return out;
}

DisplacementSet rescale_displacements(const DisplacementSet& d, double H, double W,
                                      double h, double w) {
    if (!(H > 0.0) || !(W > 0.0) || !(h > 0.0) || !(w > 0.0))
        throw InvalidArgument("rescale_displacements: dimensions must be positive");
    DisplacementSet out;
    out.frame_h = h;
    out.frame_w = w;
    out.deltas.reserve(d.deltas.size());
    for (const auto& [dx, dy] : d.deltas)
        out.deltas.push_back({dx * h / H, dy * w / W});
    return out;
}

TpsCoefficients solve_tps(const ControlGrid& grid, const DisplacementSet& disp) {
    check_grid_disp(grid, disp);
    const int n = grid.count();

    for (const auto& [dx, dy] : disp.deltas)
        if (!std::isfinite(dx) || !std::isfinite(dy))
            throw NumericError("solve_tps: non-finite displacement");

    const Eigen::MatrixXd K = kernel_system(grid);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible())
        throw NumericError("solve_tps: degenerate grid (singular kernel system)");

    // Fit the displacement field; the identity is added to the affine block
    // afterwards so an all-zero fit is exactly the identity map.
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
        rhs(i, 0) = disp.deltas[i][0];
        rhs(i, 1) = disp.deltas[i][1];
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);

    TpsCoefficients out;
    out.sources = grid;
    out.rbf_weights.resize(n);
    for (int i = 0; i < n; ++i) out.rbf_weights[i] = {sol(i, 0), sol(i, 1)};
    out.affine = {sol(n, 0), 1.0 + sol(n + 1, 0), sol(n + 2, 0),
                  sol(n, 1), sol(n + 1, 1), 1.0 + sol(n + 2, 1)};
    return out;
}

std::array<double, 2> evaluate(const TpsCoefficients& coeffs, double x, double y) {
    const auto& a = coeffs.affine;
    double px = a[0] + a[1] * x + a[2] * y;
    double py = a[3] + a[4] * x + a[5] * y;
    const int n = coeffs.sources.count();
    for (int i = 0; i < n; ++i) {
        const double u = kernel_sq(sq(x - coeffs.sources.points[i][0]) +
                                   sq(y - coeffs.sources.points[i][1]));
        px += coeffs.rbf_weights[i][0] * u;
        py += coeffs.rbf_weights[i][1] * u;
    }
    return {px, py};
}

ImageD warp_image(const ImageD& img, const TpsCoefficients& coeffs, Interp interp) {
    if (!coeffs.finite()) throw NumericError("warp_image: non-finite coefficients");
    ImageD out(img.rows(), img.cols());
    const double cx = 0.5 * (img.rows() - 1);
    const double cy = 0.5 * (img.cols() - 1);
    for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c) {
            const auto pos = evaluate(coeffs, r - cx, c - cy);
            out(r, c) = (interp == Interp::Bilinear) ? sample_bilinear(img, pos[0], pos[1]).value
                                                     : sample_nearest(img, pos[0], pos[1]);
        }
    }
    return out;
}

MaskU8 warp_label_nearest(const MaskU8& mask, const TpsCoefficients& coeffs) {
    if (!coeffs.finite()) throw NumericError("warp_label: non-finite coefficients");
    MaskU8 out(mask.rows(), mask.cols(), 0);
    const double cx = 0.5 * (mask.rows() - 1);
    const double cy = 0.5 * (mask.cols() - 1);
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            const auto pos = evaluate(coeffs, r - cx, c - cy);
            const int rr = static_cast<int>(std::lround(pos[0] + cx));
            const int cc = static_cast<int>(std::lround(pos[1] + cy));
            out(r, c) = mask.in_bounds(rr, cc) ? mask(rr, cc) : 0;
        }
    }
    return out;
}

WarpBasis make_warp_basis(const ControlGrid& grid, int h, int w) {
    if (h <= 0 || w <= 0) throw InvalidArgument("make_warp_basis: raster must be non-empty");
    const int n = grid.count();

    const Eigen::MatrixXd K = kernel_system(grid);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible())
        throw NumericError("make_warp_basis: degenerate grid (singular kernel system)");
    // First n columns of K^-1: the map from displacement values to coefficients.
    const Eigen::MatrixXd Minv = lu.solve(Eigen::MatrixXd::Identity(n + 3, n + 3)).leftCols(n);

    Eigen::MatrixXd E(static_cast<Eigen::Index>(h) * w, n + 3);
    const double cx = 0.5 * (h - 1);
    const double cy = 0.5 * (w - 1);
    Eigen::Index row = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c, ++row) {
            const double x = r - cx;
            const double y = c - cy;
            for (int i = 0; i < n; ++i)
                E(row, i) = kernel_sq(sq(x - grid.points[i][0]) + sq(y - grid.points[i][1]));
            E(row, n) = 1.0;
            E(row, n + 1) = x;
            E(row, n + 2) = y;
        }
    }

    WarpBasis basis;
    basis.h = h;
    basis.w = w;
    basis.grid = grid;
    basis.basis.noalias() = E * Minv;
    return basis;
}

ImageD warp_with_basis(const ImageD& img, const WarpBasis& basis,
                       const std::vector<std::array<double, 2>>& deltas, Interp interp) {
    if (img.rows() != basis.h || img.cols() != basis.w)
        throw InvalidArgument("warp_with_basis: raster shape mismatch");
    if (static_cast<int>(deltas.size()) != basis.grid.count())
        throw InvalidArgument("warp_with_basis: displacement count mismatch");

    const int n = basis.grid.count();
    ImageD out(img.rows(), img.cols());
    const double cx = 0.5 * (img.rows() - 1);
    const double cy = 0.5 * (img.cols() - 1);
    Eigen::Index row = 0;
    for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c, ++row) {
            double x = r - cx;
            double y = c - cy;
            for (int i = 0; i < n; ++i) {
                const double b = basis.basis(row, i);
                x += b * deltas[i][0];
                y += b * deltas[i][1];
            }
            if (!std::isfinite(x) || !std::isfinite(y))
                throw NumericError("warp_with_basis: non-finite sample position");
            out(r, c) = (interp == Interp::Bilinear) ? sample_bilinear(img, x, y).value
                                                     : sample_nearest(img, x, y);
        }
    }
    return out;
}

void warp_vjp(const ImageD& img, const WarpBasis& basis,
              const std::vector<std::array<double, 2>>& deltas,
              const ImageD& d_out,
              std::vector<std::array<double, 2>>& d_deltas,
              ImageD* d_img) {
    if (img.rows() != basis.h || img.cols() != basis.w || !d_out.same_shape(img))
        throw InvalidArgument("warp_vjp: raster shape mismatch");
    const int n = basis.grid.count();
    if (static_cast<int>(deltas.size()) != n)
        throw InvalidArgument("warp_vjp: displacement count mismatch");

    d_deltas.assign(n, {0.0, 0.0});
    const double cx = 0.5 * (img.rows() - 1);
    const double cy = 0.5 * (img.cols() - 1);
    Eigen::Index row = 0;
    for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c, ++row) {
            const double g = d_out(r, c);
            double x = r - cx;
            double y = c - cy;
            for (int i = 0; i < n; ++i) {
                const double b = basis.basis(row, i);
                x += b * deltas[i][0];
                y += b * deltas[i][1];
            }
            const BilinearSample s = sample_bilinear(img, x, y);
            if (g != 0.0) {
                const double gx = g * s.gx;
                const double gy = g * s.gy;
                for (int i = 0; i < n; ++i) {
                    const double b = basis.basis(row, i);
                    d_deltas[i][0] += gx * b;
                    d_deltas[i][1] += gy * b;
                }
            }
            if (d_img != nullptr && g != 0.0) {
                const double rr = x + cx;
                const double cc = y + cy;
                const double rf = std::floor(rr);
                const double cf = std::floor(cc);
                const int r0 = static_cast<int>(rf);
                const int c0 = static_cast<int>(cf);
                const double fr = rr - rf;
                const double fc = cc - cf;
                auto add = [&](int ar, int ac, double wgt) {
                    if (d_img->in_bounds(ar, ac)) (*d_img)(ar, ac) += g * wgt;
                };
                add(r0, c0, (1.0 - fr) * (1.0 - fc));
                add(r0, c0 + 1, (1.0 - fr) * fc);
                add(r0 + 1, c0, fr * (1.0 - fc));
                add(r0 + 1, c0 + 1, fr * fc);
            }
        }
    }
}

} // namespace umyops::tps

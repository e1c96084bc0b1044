#ifndef UMYOPS_TESTS_ORACLES_HPP
#define UMYOPS_TESTS_ORACLES_HPP

// Independent reference implementations used as ground truth by the tests.
// Everything here deliberately avoids the library's own code paths: the
// linear solver is a hand-rolled elimination, distances are brute force,
// samplers are re-derived from scratch.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "umyops/core/array2d.hpp"
#include "umyops/core/rng.hpp"

namespace oracles {

using umyops::Array2D;
using umyops::ImageD;
using umyops::MaskU8;

// ---- dense linear algebra ------------------------------------------------

// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b,
                        std::vector<double>& x) {
    const int n = static_cast<int>(a.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-13) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return true;
}

// ---- thin-plate spline reference ------------------------------------------

inline double tps_u(double d2) { return d2 > 0.0 ? d2 * std::log(d2) : 0.0; }

struct TpsRef {
    std::vector<std::array<double, 2>> pts;
    std::vector<double> wx, wy;   // n radial weights + 3 affine terms each
};

// Solves the (n+3)x(n+3) displacement-interpolation system directly.
inline TpsRef tps_solve_ref(const std::vector<std::array<double, 2>>& pts,
                            const std::vector<std::array<double, 2>>& deltas) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<double>> A(n + 3, std::vector<double>(n + 3, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double dx = pts[i][0] - pts[j][0];
            const double dy = pts[i][1] - pts[j][1];
            A[i][j] = tps_u(dx * dx + dy * dy);
        }
        A[i][n] = A[n][i] = 1.0;
        A[i][n + 1] = A[n + 1][i] = pts[i][0];
        A[i][n + 2] = A[n + 2][i] = pts[i][1];
    }
    std::vector<double> bx(n + 3, 0.0), by(n + 3, 0.0);
    for (int i = 0; i < n; ++i) {
        bx[i] = deltas[i][0];
        by[i] = deltas[i][1];
    }
    TpsRef ref;
    ref.pts = pts;
    solve_dense(A, bx, ref.wx);
    solve_dense(A, by, ref.wy);
    return ref;
}

// Mapped position (identity + interpolated displacement).
inline std::array<double, 2> tps_map_ref(const TpsRef& ref, double x, double y) {
    const int n = static_cast<int>(ref.pts.size());
    double fx = ref.wx[n] + ref.wx[n + 1] * x + ref.wx[n + 2] * y;
    double fy = ref.wy[n] + ref.wy[n + 1] * x + ref.wy[n + 2] * y;
    for (int i = 0; i < n; ++i) {
        const double dx = x - ref.pts[i][0];
        const double dy = y - ref.pts[i][1];
        const double u = tps_u(dx * dx + dy * dy);
        fx += ref.wx[i] * u;
        fy += ref.wy[i] * u;
    }
    return {x + fx, y + fy};
}

// Independent zero-filled bilinear lookup (x = row offset from centre).
inline double bilinear_ref(const ImageD& img, double x, double y) {
    const double r = x + 0.5 * (img.rows() - 1);
    const double c = y + 0.5 * (img.cols() - 1);
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    double acc = 0.0;
    for (int dr = 0; dr <= 1; ++dr) {
        for (int dc = 0; dc <= 1; ++dc) {
            const int rr = r0 + dr;
            const int cc = c0 + dc;
            if (rr < 0 || rr >= img.rows() || cc < 0 || cc >= img.cols()) continue;
            const double wr = dr == 0 ? (1.0 - (r - r0)) : (r - r0);
            const double wc = dc == 0 ? (1.0 - (c - c0)) : (c - c0);
            acc += wr * wc * img(rr, cc);
        }
    }
    return acc;
}

// ---- images ----------------------------------------------------------------

// Random smooth test image: a handful of Gaussian bumps.
inline ImageD smooth_image(int h, int w, umyops::Rng& rng, int bumps = 6, double min_sigma = 5.0) {
    ImageD img(h, w, 0.0);
    for (int b = 0; b < bumps; ++b) {
        const double cx = rng.uniform(0.15, 0.85) * h;
        const double cy = rng.uniform(0.15, 0.85) * w;
        const double sigma = min_sigma + rng.uniform() * 0.12 * h;
        const double amp = rng.uniform(-1.0, 1.0);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double d2 = (r - cx) * (r - cx) + (c - cy) * (c - cy);
                img(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }
    return img;
}

// 2x block mean, applied `levels` times.
inline ImageD downsample_avg(const ImageD& img, int levels) {
    ImageD cur = img;
    for (int l = 0; l < levels; ++l) {
        ImageD next(cur.rows() / 2, cur.cols() / 2);
        for (int r = 0; r < next.rows(); ++r)
            for (int c = 0; c < next.cols(); ++c)
                next(r, c) = 0.25 * (cur(2 * r, 2 * c) + cur(2 * r, 2 * c + 1) +
                                     cur(2 * r + 1, 2 * c) + cur(2 * r + 1, 2 * c + 1));
        cur = next;
    }
    return cur;
}

// ---- masks & set metrics ----------------------------------------------------

inline double dice_ref(const MaskU8& a, const MaskU8& b) {
    int inter = 0, na = 0, nb = 0;
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c) {
            const bool pa = a(r, c) != 0, pb = b(r, c) != 0;
            inter += pa && pb;
            na += pa;
            nb += pb;
        }
    if (na + nb == 0) return 1.0;
    return 2.0 * inter / static_cast<double>(na + nb);
}

inline std::vector<std::array<int, 2>> boundary_ref(const MaskU8& m) {
    std::vector<std::array<int, 2>> pts;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            if (m(r, c) == 0) continue;
            bool edge = r == 0 || r == m.rows() - 1 || c == 0 || c == m.cols() - 1;
            if (!edge)
                edge = m(r - 1, c) == 0 || m(r + 1, c) == 0 || m(r, c - 1) == 0 || m(r, c + 1) == 0;
            if (edge) pts.push_back({r, c});
        }
    return pts;
}

// Symmetric Hausdorff over boundary points, all-pairs.
inline double hausdorff_ref(const MaskU8& a, const MaskU8& b, double sr, double sc) {
    const auto pa = boundary_ref(a);
    const auto pb = boundary_ref(b);
    auto directed = [&](const std::vector<std::array<int, 2>>& from,
                        const std::vector<std::array<int, 2>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dr = (p[0] - q[0]) * sr;
                const double dc = (p[1] - q[1]) * sc;
                best = std::min(best, dr * dr + dc * dc);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

inline std::array<double, 2> sen_pre_ref(const MaskU8& pred, const MaskU8& gold) {
    int tp = 0, fp = 0, fn = 0;
    for (int r = 0; r < pred.rows(); ++r)
        for (int c = 0; c < pred.cols(); ++c) {
            const bool p = pred(r, c) != 0, g = gold(r, c) != 0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
    const double sen = (tp + fn) > 0 ? tp / static_cast<double>(tp + fn) : 0.0;
    const double pre = (tp + fp) > 0 ? tp / static_cast<double>(tp + fp) : 0.0;
    return {sen, pre};
}

// 16-bit pattern -> 4x4 mask.
inline MaskU8 mask4x4(uint16_t bits) {
    MaskU8 m(4, 4, 0);
    for (int i = 0; i < 16; ++i)
        if (bits & (1u << i)) m(i / 4, i % 4) = 1;
    return m;
}

inline MaskU8 random_mask(int h, int w, umyops::Rng& rng, double density = 0.4) {
    MaskU8 m(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (rng.uniform() < density) m(r, c) = 1;
    return m;
}

inline double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace oracles

#endif

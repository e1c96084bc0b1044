#include "umyops/nn/ops.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace umyops::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

// col(cin*k*k, h*w) layout so the conv GEMM is W(cout, cin*k*k) * col.
void im2col(const Tensor& x, int k, std::vector<float>& col) {
    const int pad = k / 2;
    const int h = x.h, w = x.w;
    col.assign(static_cast<size_t>(x.c) * k * k * h * w, 0.0f);
    const size_t plane = x.plane();
    size_t row = 0;
    for (int ci = 0; ci < x.c; ++ci) {
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc, ++row) {
                float* dst = col.data() + row * plane;
                const int dr = kr - pad, dc = kc - pad;
                const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
                const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
                for (int r = r0; r < r1; ++r) {
                    const float* src = x.v.data() + ci * plane + (r + dr) * w + (c0 + dc);
                    std::copy(src, src + (c1 - c0), dst + r * w + c0);
                }
            }
        }
    }
}

void col2im_accum(const std::vector<float>& col, int c, int h, int w, int k, Tensor& out) {
    const int pad = k / 2;
    const size_t plane = static_cast<size_t>(h) * w;
    size_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc, ++row) {
                const float* src = col.data() + row * plane;
                const int dr = kr - pad, dc = kc - pad;
                const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
                const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
                for (int r = r0; r < r1; ++r) {
                    float* dst = out.v.data() + ci * plane + (r + dr) * w + (c0 + dc);
                    const float* s = src + r * w + c0;
                    for (int i = 0; i < c1 - c0; ++i) dst[i] += s[i];
                }
            }
        }
    }
}

} // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int cout, int cin, int k) {
    if (x->val.c != cin) throw InvalidArgument("conv2d: input channel mismatch");
    if (weight->val.c != cout || weight->val.h != cin * k * k)
        throw InvalidArgument("conv2d: weight shape mismatch");
    if (k != 1 && k != 3) throw InvalidArgument("conv2d: kernel must be 1 or 3");

    const int h = x->val.h, w = x->val.w;
    const size_t plane = static_cast<size_t>(h) * w;
    const int kk = cin * k * k;

    auto col = std::make_shared<std::vector<float>>();
    im2col(x->val, k, *col);

    Tensor out(cout, h, w);
    {
        MapC W(weight->val.v.data(), cout, kk);
        MapC C(col->data(), kk, static_cast<Eigen::Index>(plane));
        MapM O(out.v.data(), cout, static_cast<Eigen::Index>(plane));
        O.noalias() = W * C;
    }
    if (bias) {
        for (int co = 0; co < cout; ++co) {
            const float b = bias->val.v[co];
            float* dst = out.v.data() + co * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] += b;
        }
    }

    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = bias ? std::vector<Var>{x, weight, bias} : std::vector<Var>{x, weight};
    n->requires_grad = x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    if (n->requires_grad) {
        n->backward_fn = [col, cout, cin, k, h, w, plane, kk](Node& self) {
            Node* x_ = self.parents[0].get();
            Node* w_ = self.parents[1].get();
            Node* b_ = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
            MapC G(self.grad.v.data(), cout, static_cast<Eigen::Index>(plane));
            if (w_->requires_grad) {
                w_->ensure_grad();
                MapC C(col->data(), kk, static_cast<Eigen::Index>(plane));
                MapM dW(w_->grad.v.data(), cout, kk);
                dW.noalias() += G * C.transpose();
            }
            if (b_ && b_->requires_grad) {
                b_->ensure_grad();
                for (int co = 0; co < cout; ++co) {
                    const float* g = self.grad.v.data() + co * plane;
                    float acc = 0.0f;
                    for (size_t i = 0; i < plane; ++i) acc += g[i];
                    b_->grad.v[co] += acc;
                }
            }
            if (x_->requires_grad) {
                x_->ensure_grad();
                std::vector<float> dcol(static_cast<size_t>(kk) * plane);
                MapC W(w_->val.v.data(), cout, kk);
                MapM dC(dcol.data(), kk, static_cast<Eigen::Index>(plane));
                dC.noalias() = W.transpose() * G;
                col2im_accum(dcol, cin, h, w, k, x_->grad);
            }
        };
    }
    return n;
}

Var maxpool2(const Var& x) {
    if (x->val.h % 2 != 0 || x->val.w % 2 != 0) throw InvalidArgument("maxpool2: odd raster");
    const int c = x->val.c, oh = x->val.h / 2, ow = x->val.w / 2, w = x->val.w;
    Tensor out(c, oh, ow);
    auto argmax = std::make_shared<std::vector<int32_t>>(out.size());
    const size_t iplane = x->val.plane();
    for (int ci = 0; ci < c; ++ci) {
        for (int r = 0; r < oh; ++r) {
            for (int col = 0; col < ow; ++col) {
                const int base = ci * static_cast<int>(iplane) + 2 * r * w + 2 * col;
                int best = base;
                float bv = x->val.v[base];
                for (const int off : {1, w, w + 1}) {
                    const float v = x->val.v[base + off];
                    if (v > bv) {
                        bv = v;
                        best = base + off;
                    }
                }
                const size_t oi = (static_cast<size_t>(ci) * oh + r) * ow + col;
                out.v[oi] = bv;
                (*argmax)[oi] = best;
            }
        }
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [argmax](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                p->grad.v[(*argmax)[i]] += self.grad.v[i];
        };
    }
    return n;
}

Var upsample_nearest2(const Var& x) {
    const int c = x->val.c, h = x->val.h, w = x->val.w;
    Tensor out(c, 2 * h, 2 * w);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < 2 * h; ++r)
            for (int col = 0; col < 2 * w; ++col)
                out.at(ci, r, col) = x->val.at(ci, r / 2, col / 2);
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [c, h, w](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int ci = 0; ci < c; ++ci)
                for (int r = 0; r < 2 * h; ++r)
                    for (int col = 0; col < 2 * w; ++col)
                        p->grad.at(ci, r / 2, col / 2) += self.grad.at(ci, r, col);
        };
    }
    return n;
}

Var resize_bilinear(const Var& x, int oh, int ow) {
    const int c = x->val.c, ih = x->val.h, iw = x->val.w;
    if (oh <= 0 || ow <= 0) throw InvalidArgument("resize_bilinear: bad target");
    // source coordinates with half-pixel centres, clamped to the raster
    struct Tap { int i0, i1; float f; };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(out);
        const double s = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double pos = (o + 0.5) * s - 0.5;
            pos = std::min(std::max(pos, 0.0), static_cast<double>(in - 1));
            const int i0 = static_cast<int>(std::floor(pos));
            t[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(pos - i0)};
        }
        return t;
    };
    auto rt = std::make_shared<std::vector<Tap>>(taps(ih, oh));
    auto ct = std::make_shared<std::vector<Tap>>(taps(iw, ow));

    Tensor out(c, oh, ow);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < oh; ++r) {
            const Tap& a = (*rt)[r];
            for (int col = 0; col < ow; ++col) {
                const Tap& b = (*ct)[col];
                const float v00 = x->val.at(ci, a.i0, b.i0);
                const float v01 = x->val.at(ci, a.i0, b.i1);
                const float v10 = x->val.at(ci, a.i1, b.i0);
                const float v11 = x->val.at(ci, a.i1, b.i1);
                out.at(ci, r, col) = (1 - a.f) * ((1 - b.f) * v00 + b.f * v01) +
                                     a.f * ((1 - b.f) * v10 + b.f * v11);
            }
        }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [rt, ct, c, oh, ow](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int ci = 0; ci < c; ++ci)
                for (int r = 0; r < oh; ++r) {
                    const Tap& a = (*rt)[r];
                    for (int col = 0; col < ow; ++col) {
                        const Tap& b = (*ct)[col];
                        const float g = self.grad.at(ci, r, col);
                        p->grad.at(ci, a.i0, b.i0) += g * (1 - a.f) * (1 - b.f);
                        p->grad.at(ci, a.i0, b.i1) += g * (1 - a.f) * b.f;
                        p->grad.at(ci, a.i1, b.i0) += g * a.f * (1 - b.f);
                        p->grad.at(ci, a.i1, b.i1) += g * a.f * b.f;
                    }
                }
        };
    }
    return n;
}

Var global_avg_pool(const Var& x) {
    const int c = x->val.c;
    const size_t plane = x->val.plane();
    Tensor out(c, 1, 1);
    for (int ci = 0; ci < c; ++ci) {
        float acc = 0.0f;
        const float* src = x->val.v.data() + ci * plane;
        for (size_t i = 0; i < plane; ++i) acc += src[i];
        out.v[ci] = acc / static_cast<float>(plane);
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [c, plane](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int ci = 0; ci < c; ++ci) {
                const float g = self.grad.v[ci] / static_cast<float>(plane);
                float* dst = p->grad.v.data() + ci * plane;
                for (size_t i = 0; i < plane; ++i) dst[i] += g;
            }
        };
    }
    return n;
}

Var fully_connected(const Var& x, const Var& weight, const Var& bias, int mout, int nin) {
    if (static_cast<int>(x->val.size()) != nin) throw InvalidArgument("fc: input size mismatch");
    if (weight->val.c != mout || weight->val.h != nin) throw InvalidArgument("fc: weight shape");
    Tensor out(mout, 1, 1);
    for (int m = 0; m < mout; ++m) {
        float acc = bias ? bias->val.v[m] : 0.0f;
        const float* wrow = weight->val.v.data() + static_cast<size_t>(m) * nin;
        for (int i = 0; i < nin; ++i) acc += wrow[i] * x->val.v[i];
        out.v[m] = acc;
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = bias ? std::vector<Var>{x, weight, bias} : std::vector<Var>{x, weight};
    n->requires_grad = x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    if (n->requires_grad) {
        n->backward_fn = [mout, nin](Node& self) {
            Node* x_ = self.parents[0].get();
            Node* w_ = self.parents[1].get();
            Node* b_ = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
            if (w_->requires_grad) {
                w_->ensure_grad();
                for (int m = 0; m < mout; ++m) {
                    const float g = self.grad.v[m];
                    float* dst = w_->grad.v.data() + static_cast<size_t>(m) * nin;
                    for (int i = 0; i < nin; ++i) dst[i] += g * x_->val.v[i];
                }
            }
            if (b_ && b_->requires_grad) {
                b_->ensure_grad();
                for (int m = 0; m < mout; ++m) b_->grad.v[m] += self.grad.v[m];
            }
            if (x_->requires_grad) {
                x_->ensure_grad();
                for (int m = 0; m < mout; ++m) {
                    const float g = self.grad.v[m];
                    const float* wrow = w_->val.v.data() + static_cast<size_t>(m) * nin;
                    for (int i = 0; i < nin; ++i) x_->grad.v[i] += g * wrow[i];
                }
            }
        };
    }
    return n;
}

Var tps_warp(const Var& x, const Var& delta, const tps::WarpBasis& basis, double delta_scale) {
    const int c = x->val.c, h = x->val.h, w = x->val.w;
    if (h != basis.h || w != basis.w) throw InvalidArgument("tps_warp: raster mismatch");
    const int npts = basis.grid.count();
    if (static_cast<int>(delta->val.size()) != 2 * npts)
        throw InvalidArgument("tps_warp: delta size mismatch");

    // sampling positions (shared across channels): pos = identity + B * delta
    const size_t plane = static_cast<size_t>(h) * w;
    auto px = std::make_shared<std::vector<double>>(plane);
    auto py = std::make_shared<std::vector<double>>(plane);
    {
        Eigen::VectorXd dx(npts), dy(npts);
        for (int i = 0; i < npts; ++i) {
            dx[i] = static_cast<double>(delta->val.v[i]) * delta_scale;
            dy[i] = static_cast<double>(delta->val.v[npts + i]) * delta_scale;
        }
        Eigen::VectorXd ox = basis.basis * dx;
        Eigen::VectorXd oy = basis.basis * dy;
        const double cx = 0.5 * (h - 1), cy = 0.5 * (w - 1);
        size_t idx = 0;
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col, ++idx) {
                (*px)[idx] = (r - cx) + ox[static_cast<Eigen::Index>(idx)] + cx;
                (*py)[idx] = (col - cy) + oy[static_cast<Eigen::Index>(idx)] + cy;
                if (!std::isfinite((*px)[idx]) || !std::isfinite((*py)[idx]))
                    throw NumericError("tps_warp: non-finite sample position");
            }
    }

    Tensor out(c, h, w);
    for (int ci = 0; ci < c; ++ci) {
        const float* src = x->val.v.data() + ci * plane;
        float* dst = out.v.data() + ci * plane;
        for (size_t i = 0; i < plane; ++i) {
            const double r = (*px)[i], col = (*py)[i];
            const double rf = std::floor(r), cf = std::floor(col);
            const int r0 = static_cast<int>(rf), c0 = static_cast<int>(cf);
            const double fr = r - rf, fc = col - cf;
            auto at = [&](int rr, int cc) -> double {
                return (rr >= 0 && rr < h && cc >= 0 && cc < w) ? src[rr * w + cc] : 0.0;
            };
            dst[i] = static_cast<float>((1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)) +
                                        fr * ((1 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1)));
        }
    }

    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x, delta};
    n->requires_grad = x->requires_grad || delta->requires_grad;
    if (n->requires_grad) {
        const tps::WarpBasis* basis_ptr = &basis;  // caller keeps the cache alive
        n->backward_fn = [px, py, basis_ptr, delta_scale, c, h, w, npts, plane](Node& self) {
            Node* x_ = self.parents[0].get();
            Node* d_ = self.parents[1].get();
            if (x_->requires_grad) x_->ensure_grad();
            if (d_->requires_grad) d_->ensure_grad();

            // accumulated position-gradients for one shared basis backprojection
            std::vector<double> gx(plane, 0.0), gy(plane, 0.0);
            for (int ci = 0; ci < c; ++ci) {
                const float* src = x_->val.v.data() + ci * plane;
                const float* g = self.grad.v.data() + ci * plane;
                float* dximg = x_->requires_grad ? x_->grad.v.data() + ci * plane : nullptr;
                for (size_t i = 0; i < plane; ++i) {
                    const float gi = g[i];
                    if (gi == 0.0f) continue;
                    const double r = px->at(i), col = py->at(i);
                    const double rf = std::floor(r), cf = std::floor(col);
                    const int r0 = static_cast<int>(rf), c0 = static_cast<int>(cf);
                    const double fr = r - rf, fc = col - cf;
                    auto at = [&](int rr, int cc) -> double {
                        return (rr >= 0 && rr < h && cc >= 0 && cc < w) ? src[rr * w + cc] : 0.0;
                    };
                    const double v00 = at(r0, c0), v01 = at(r0, c0 + 1);
                    const double v10 = at(r0 + 1, c0), v11 = at(r0 + 1, c0 + 1);
                    if (d_->requires_grad) {
                        gx[i] += gi * ((1 - fc) * (v10 - v00) + fc * (v11 - v01));
                        gy[i] += gi * ((1 - fr) * (v01 - v00) + fr * (v11 - v10));
                    }
                    if (dximg) {
                        auto put = [&](int rr, int cc, double wgt) {
                            if (rr >= 0 && rr < h && cc >= 0 && cc < w)
                                dximg[rr * w + cc] += static_cast<float>(gi * wgt);
                        };
                        put(r0, c0, (1 - fr) * (1 - fc));
                        put(r0, c0 + 1, (1 - fr) * fc);
                        put(r0 + 1, c0, fr * (1 - fc));
                        put(r0 + 1, c0 + 1, fr * fc);
                    }
                }
            }
            if (d_->requires_grad) {
                Eigen::Map<const Eigen::VectorXd> gxv(gx.data(), static_cast<Eigen::Index>(plane));
                Eigen::Map<const Eigen::VectorXd> gyv(gy.data(), static_cast<Eigen::Index>(plane));
                const Eigen::VectorXd ddx = basis_ptr->basis.transpose() * gxv;
                const Eigen::VectorXd ddy = basis_ptr->basis.transpose() * gyv;
                for (int i = 0; i < npts; ++i) {
                    d_->grad.v[i] += static_cast<float>(ddx[i] * delta_scale);
                    d_->grad.v[npts + i] += static_cast<float>(ddy[i] * delta_scale);
                }
            }
        };
    }
    return n;
}

Var softmax_cross_entropy(const Var& logits, const MaskU8& target_classes) {
    const int K = logits->val.c, h = logits->val.h, w = logits->val.w;
    if (target_classes.rows() != h || target_classes.cols() != w)
        throw InvalidArgument("softmax_cross_entropy: target shape mismatch");
    for (const auto t : target_classes.raw())
        if (t >= K) throw InvalidArgument("softmax_cross_entropy: target class out of range");

    const size_t plane = static_cast<size_t>(h) * w;
    auto probs = std::make_shared<Tensor>(K, h, w);
    double loss = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        float mx = logits->val.v[i];
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits->val.v[k * plane + i]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            const double e = std::exp(static_cast<double>(logits->val.v[k * plane + i]) - mx);
            probs->v[k * plane + i] = static_cast<float>(e);
            z += e;
        }
        for (int k = 0; k < K; ++k) probs->v[k * plane + i] /= static_cast<float>(z);
        const int t = target_classes.raw()[i];
        loss -= std::log(std::max(static_cast<double>(probs->v[t * plane + i]), 1e-30));
    }
    loss /= static_cast<double>(plane);

    auto targets = std::make_shared<MaskU8>(target_classes);
    auto n = std::make_shared<Node>();
    n->val = Tensor::scalar(static_cast<float>(loss));
    n->parents = {logits};
    n->requires_grad = logits->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [probs, targets, K, plane](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            const float g = self.grad.v[0] / static_cast<float>(plane);
            for (size_t i = 0; i < plane; ++i) {
                const int t = targets->raw()[i];
                for (int k = 0; k < K; ++k) {
                    const float soft = probs->v[k * plane + i];
                    p->grad.v[k * plane + i] += g * (soft - (k == t ? 1.0f : 0.0f));
                }
            }
        };
    }
    return n;
}

Var softmax(const Var& logits) {
    const int K = logits->val.c;
    const size_t plane = logits->val.plane();
    Tensor out = logits->val;
    for (size_t i = 0; i < plane; ++i) {
        float mx = out.v[i];
        for (int k = 1; k < K; ++k) mx = std::max(mx, out.v[k * plane + i]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            const double e = std::exp(static_cast<double>(out.v[k * plane + i]) - mx);
            out.v[k * plane + i] = static_cast<float>(e);
            z += e;
        }
        for (int k = 0; k < K; ++k) out.v[k * plane + i] /= static_cast<float>(z);
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {logits};
    n->requires_grad = logits->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [K, plane](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < plane; ++i) {
                double dot = 0.0;
                for (int k = 0; k < K; ++k)
                    dot += static_cast<double>(self.grad.v[k * plane + i]) * self.val.v[k * plane + i];
                for (int k = 0; k < K; ++k) {
                    const double s = self.val.v[k * plane + i];
                    p->grad.v[k * plane + i] +=
                        static_cast<float>(s * (self.grad.v[k * plane + i] - dot));
                }
            }
        };
    }
    return n;
}

Tensor softmax_infer(const Tensor& logits) {
    Tensor out = logits;
    const size_t plane = logits.plane();
    for (size_t i = 0; i < plane; ++i) {
        float mx = out.v[i];
        for (int k = 1; k < out.c; ++k) mx = std::max(mx, out.v[k * plane + i]);
        double z = 0.0;
        for (int k = 0; k < out.c; ++k) {
            out.v[k * plane + i] = std::exp(out.v[k * plane + i] - mx);
            z += out.v[k * plane + i];
        }
        for (int k = 0; k < out.c; ++k) out.v[k * plane + i] /= static_cast<float>(z);
    }
    return out;
}

Var soft_dice_score(const Var& pred, int channel, const ImageD& target, double eps) {
    const int h = pred->val.h, w = pred->val.w;
    if (channel < 0 || channel >= pred->val.c) throw InvalidArgument("soft_dice: bad channel");
    if (target.rows() != h || target.cols() != w)
        throw InvalidArgument("soft_dice: target shape mismatch");

    const size_t plane = static_cast<size_t>(h) * w;
    const float* p = pred->val.v.data() + static_cast<size_t>(channel) * plane;
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        const double t = target.raw()[i];
        inter += p[i] * t;
        sp += p[i];
        st += t;
    }
    const double num = 2.0 * inter + eps;
    const double den = sp + st + eps;
    const double score = num / den;

    auto tgt = std::make_shared<ImageD>(target);
    auto n = std::make_shared<Node>();
    n->val = Tensor::scalar(static_cast<float>(score));
    n->parents = {pred};
    n->requires_grad = pred->requires_grad;
    if (n->requires_grad) {
        n->backward_fn = [tgt, channel, plane, num, den](Node& self) {
            Node* pr = self.parents[0].get();
            pr->ensure_grad();
            const double g = self.grad.v[0];
            float* dst = pr->grad.v.data() + static_cast<size_t>(channel) * plane;
            const double inv_den = 1.0 / den;
            for (size_t i = 0; i < plane; ++i) {
                const double t = tgt->raw()[i];
                dst[i] += static_cast<float>(g * (2.0 * t * inv_den - num * inv_den * inv_den));
            }
        };
    }
    return n;
}

} // namespace umyops::nn

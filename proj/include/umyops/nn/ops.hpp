#ifndef UMYOPS_NN_OPS_HPP
#define UMYOPS_NN_OPS_HPP

#include "umyops/nn/autodiff.hpp"
#include "umyops/tps/tps.hpp"

namespace umyops::nn {

// 2D convolution, stride 1, square kernel k in {1,3}, zero padding k/2.
// weight is (cout, cin*k*k, 1); bias (cout,1,1) or nullptr.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int cout, int cin, int k);

Var maxpool2(const Var& x);
Var upsample_nearest2(const Var& x);

// Half-pixel-centre bilinear resize with edge clamping.
Var resize_bilinear(const Var& x, int oh, int ow);

Var global_avg_pool(const Var& x);               // (c,h,w) -> (c,1,1)
Var fully_connected(const Var& x, const Var& weight, const Var& bias, int mout, int nin);

// Warp every channel of x by the thin-plate spline whose control-point
// displacements are delta (flat (2n,1,1): n dx values then n dy values,
// in a frame scaled by delta_scale relative to the basis raster).
// Gradients flow into both x and delta.
Var tps_warp(const Var& x, const Var& delta, const tps::WarpBasis& basis, double delta_scale);

// Mean over pixels of -log softmax(logits)[target]; logits (K,h,w).
Var softmax_cross_entropy(const Var& logits, const MaskU8& target_classes);

// Channelwise softmax over c at each pixel.
Var softmax(const Var& logits);

// Channelwise softmax, forward only (inference).
Tensor softmax_infer(const Tensor& logits);

// Smoothed soft Dice score in [0,1]: (2*sum(p*t)+eps)/(sum(p)+sum(t)+eps).
// pred is one channel of probabilities; target a 0/1 mask.
Var soft_dice_score(const Var& pred, int channel, const ImageD& target, double eps);

} // namespace umyops::nn

#endif

#ifndef UMYOPS_NN_TENSOR_HPP
#define UMYOPS_NN_TENSOR_HPP

#include <vector>

#include "umyops/core/array2d.hpp"

namespace umyops::nn {

// Dense float tensor, channels x rows x cols. Scalars are (1,1,1);
// flat vectors are (n,1,1).
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, float fill = 0.0f)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {
        if (c_ < 0 || h_ < 0 || w_ < 0) throw InvalidArgument("Tensor: negative shape");
    }

    static Tensor scalar(float s) {
        Tensor t(1, 1, 1);
        t.v[0] = s;
        return t;
    }

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    float& at(int ci, int r, int col) { return v[(static_cast<size_t>(ci) * h + r) * w + col]; }
    float at(int ci, int r, int col) const { return v[(static_cast<size_t>(ci) * h + r) * w + col]; }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    bool finite() const;
};

// Conversions at the double/float boundary (TPS math runs in double).
Tensor from_image(const ImageD& img);
ImageD to_image(const Tensor& t, int channel = 0);

} // namespace umyops::nn

#endif

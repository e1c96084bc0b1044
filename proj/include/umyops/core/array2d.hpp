#ifndef UMYOPS_CORE_ARRAY2D_HPP
#define UMYOPS_CORE_ARRAY2D_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "umyops/core/errors.hpp"

namespace umyops {

// Dense row-major 2D array. Row index first ("x" axis in the TPS frame),
// column second ("y" axis).
template <typename T>
class Array2D {
public:
    Array2D() = default;
    Array2D(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) throw InvalidArgument("Array2D: negative shape");
        data_.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), fill);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    bool same_shape(const Array2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool in_bounds(int r, int c) const {
        return r >= 0 && r < rows_ && c >= 0 && c < cols_;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using ImageD = Array2D<double>;
using MaskU8 = Array2D<uint8_t>;

} // namespace umyops

#endif

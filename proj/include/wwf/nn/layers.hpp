#pragma once

// Layer primitives shared by the encoder and decoder. Feature maps are stored
// as (channels x pixels) matrices with pixels in row-major image order; dense
// activations as (features x batch). Backward passes accumulate into the
// gradient views and return the input gradient.

#include <Eigen/Dense>

#include <cstddef>

namespace wwf::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using VecMap = Eigen::Map<Vec<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Vec<T>>;

inline constexpr double kLeakySlope = 0.01;

template <typename T>
Mat<T> leaky_relu(const Mat<T>& x) {
    return x.unaryExpr([](T v) { return v > T(0) ? v : T(kLeakySlope) * v; });
}

// dy * f'(x), where x is the pre-activation.
template <typename T>
Mat<T> leaky_relu_backward(const Mat<T>& x, const Mat<T>& dy) {
    return dy.binaryExpr(x, [](T g, T v) { return v > T(0) ? g : T(kLeakySlope) * g; });
}

// Parameter location of a layer inside the flat parameter vector.
struct DenseShape {
    int in = 0;
    int out = 0;
    std::size_t weight = 0;  // out x in, column-major
    std::size_t bias = 0;

    std::size_t count() const { return static_cast<std::size_t>(in) * out + out; }
};

template <typename T>
Mat<T> dense_forward(const DenseShape& s, const T* params, const Mat<T>& x) {
    ConstMatMap<T> w(params + s.weight, s.out, s.in);
    ConstVecMap<T> b(params + s.bias, s.out);
    Mat<T> y = w * x;
    y.colwise() += b;
    return y;
}

template <typename T>
Mat<T> dense_backward(const DenseShape& s, const T* params, T* grads, const Mat<T>& x, const Mat<T>& dy) {
    ConstMatMap<T> w(params + s.weight, s.out, s.in);
    MatMap<T>(grads + s.weight, s.out, s.in).noalias() += dy * x.transpose();
    VecMap<T>(grads + s.bias, s.out) += dy.rowwise().sum();
    return w.transpose() * dy;
}

struct ConvShape {
    int in_c = 0, out_c = 0;
    int kernel = 3, stride = 1, pad = 1;
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
    std::size_t weight = 0;  // out_c x (in_c * kernel * kernel)
    std::size_t bias = 0;

    static ConvShape make(int in_c, int out_c, int kernel, int stride, int in_h, int in_w) {
        ConvShape s;
        s.in_c = in_c;
        s.out_c = out_c;
        s.kernel = kernel;
        s.stride = stride;
        s.pad = (kernel - 1) / 2;
        s.in_h = in_h;
        s.in_w = in_w;
        s.out_h = (in_h + 2 * s.pad - kernel) / stride + 1;
        s.out_w = (in_w + 2 * s.pad - kernel) / stride + 1;
        return s;
    }
    int patch() const { return in_c * kernel * kernel; }
    std::size_t count() const { return static_cast<std::size_t>(patch()) * out_c + out_c; }
};

template <typename T>
Mat<T> im2col(const ConvShape& s, const Mat<T>& x) {
    Mat<T> cols = Mat<T>::Zero(s.patch(), s.out_h * s.out_w);
    for (int c = 0; c < s.in_c; ++c) {
        for (int ky = 0; ky < s.kernel; ++ky) {
            for (int kx = 0; kx < s.kernel; ++kx) {
                const int row = (c * s.kernel + ky) * s.kernel + kx;
                for (int oy = 0; oy < s.out_h; ++oy) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.in_h) continue;
                    for (int ox = 0; ox < s.out_w; ++ox) {
                        const int ix = ox * s.stride + kx - s.pad;
                        if (ix < 0 || ix >= s.in_w) continue;
                        cols(row, oy * s.out_w + ox) = x(c, iy * s.in_w + ix);
                    }
                }
            }
        }
    }
    return cols;
}

template <typename T>
Mat<T> col2im(const ConvShape& s, const Mat<T>& cols) {
    Mat<T> x = Mat<T>::Zero(s.in_c, s.in_h * s.in_w);
    for (int c = 0; c < s.in_c; ++c) {
        for (int ky = 0; ky < s.kernel; ++ky) {
            for (int kx = 0; kx < s.kernel; ++kx) {
                const int row = (c * s.kernel + ky) * s.kernel + kx;
                for (int oy = 0; oy < s.out_h; ++oy) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.in_h) continue;
                    for (int ox = 0; ox < s.out_w; ++ox) {
                        const int ix = ox * s.stride + kx - s.pad;
                        if (ix < 0 || ix >= s.in_w) continue;
                        x(c, iy * s.in_w + ix) += cols(row, oy * s.out_w + ox);
                    }
                }
            }
        }
    }
    return x;
}

// `cols` receives im2col(x) for the backward pass.
template <typename T>
Mat<T> conv_forward(const ConvShape& s, const T* params, const Mat<T>& x, Mat<T>& cols) {
    cols = im2col(s, x);
    ConstMatMap<T> w(params + s.weight, s.out_c, s.patch());
    ConstVecMap<T> b(params + s.bias, s.out_c);
    Mat<T> y = w * cols;
    y.colwise() += b;
    return y;
}

template <typename T>
Mat<T> conv_backward(const ConvShape& s, const T* params, T* grads, const Mat<T>& cols, const Mat<T>& dy) {
    ConstMatMap<T> w(params + s.weight, s.out_c, s.patch());
    MatMap<T>(grads + s.weight, s.out_c, s.patch()).noalias() += dy * cols.transpose();
    VecMap<T>(grads + s.bias, s.out_c) += dy.rowwise().sum();
    return col2im<T>(s, w.transpose() * dy);
}

}  // namespace wwf::nn

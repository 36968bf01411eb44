#pragma once

// Small layer toolkit for the time-conditioned U-Net. Feature maps are Eigen
// column-major matrices of shape (H*W, C): each column is one channel plane,
// row index is r*W + c. Layers are parameter structs plus free forward /
// backward functions; anything backward needs lives in an explicit cache owned
// by the caller, so inference with const parameters is reentrant.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gard/rng.hpp"

namespace gard::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------- im2col

// 3x3 neighborhood gather with zero padding 1. Column layout: offset-major,
// col(:, o*C + c) = channel c shifted by offset o, o scanning (dy,dx) in
// row-major order over {-1,0,1}^2.
template <class T>
void im2col3x3(const Mat<T>& x, int H, int W, Mat<T>& col) {
    const int C = static_cast<int>(x.cols());
    col.resize(static_cast<long>(H) * W, 9L * C);
    col.setZero();
    int o = 0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx, ++o) {
            const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
            const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
            const int len = c1 - c0;
            if (len <= 0 || r0 >= r1) continue;
            for (int c = 0; c < C; ++c) {
                auto dst = col.col(static_cast<long>(o) * C + c);
                auto src = x.col(c);
                for (int r = r0; r < r1; ++r)
                    dst.segment(static_cast<long>(r) * W + c0, len) =
                        src.segment(static_cast<long>(r + dy) * W + (c0 + dx), len);
            }
        }
    }
}

// Transpose of im2col3x3: scatter-add patch gradients back onto the image grid.
template <class T>
void col2im3x3(const Mat<T>& dcol, int H, int W, int C, Mat<T>& dx) {
    dx.resize(static_cast<long>(H) * W, C);
    dx.setZero();
    int o = 0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx_ = -1; dx_ <= 1; ++dx_, ++o) {
            const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
            const int c0 = std::max(0, -dx_), c1 = std::min(W, W - dx_);
            const int len = c1 - c0;
            if (len <= 0 || r0 >= r1) continue;
            for (int c = 0; c < C; ++c) {
                auto src = dcol.col(static_cast<long>(o) * C + c);
                auto dst = dx.col(c);
                for (int r = r0; r < r1; ++r)
                    dst.segment(static_cast<long>(r + dy) * W + (c0 + dx_), len) +=
                        src.segment(static_cast<long>(r) * W + c0, len);
            }
        }
    }
}

// ---------------------------------------------------------------- conv 3x3

template <class T>
struct Conv3x3 {
    Mat<T> W;  // (9*Cin) x Cout
    Mat<T> b;  // 1 x Cout

    void init(int cin, int cout, SplitMix64& rng, double w_std) {
        W.resize(9L * cin, cout);
        for (long j = 0; j < W.cols(); ++j)
            for (long i = 0; i < W.rows(); ++i)
                W(i, j) = static_cast<T>(sample_normal(rng) * w_std);
        b = Mat<T>::Zero(1, cout);
    }
    void init_he(int cin, int cout, SplitMix64& rng) {
        init(cin, cout, rng, std::sqrt(2.0 / (9.0 * cin)));
    }
};

template <class T>
struct Conv3x3Grad {
    Mat<T> W, b;
    void zero_like(const Conv3x3<T>& p) {
        W = Mat<T>::Zero(p.W.rows(), p.W.cols());
        b = Mat<T>::Zero(1, p.b.cols());
    }
};

// col is the caller's cache; it holds the im2col matrix afterwards.
template <class T>
void conv3x3_forward(const Conv3x3<T>& p, const Mat<T>& x, int H, int W, Mat<T>& y, Mat<T>& col) {
    im2col3x3(x, H, W, col);
    y.noalias() = col * p.W;
    y.rowwise() += p.b.row(0);
}

template <class T>
void conv3x3_backward(const Conv3x3<T>& p, const Mat<T>& col, const Mat<T>& dy, int H, int W,
                      Conv3x3Grad<T>& g, Mat<T>& dx, Mat<T>& dcol_buf) {
    g.W.noalias() += col.transpose() * dy;
    g.b.row(0) += dy.colwise().sum();
    dcol_buf.noalias() = dy * p.W.transpose();
    col2im3x3(dcol_buf, H, W, static_cast<int>(p.W.rows() / 9), dx);
}

// ---------------------------------------------------------------- group norm

inline int norm_groups(int channels, int group_size) {
    int gs = std::min(group_size, channels);
    while (channels % gs != 0) --gs;  // largest divisor <= requested size
    return channels / gs;
}

template <class T>
struct GroupNorm {
    Mat<T> gamma, beta;  // 1 x C
    int groups = 1;
    static constexpr T kEps = static_cast<T>(1e-5);

    void init(int channels, int group_size) {
        gamma = Mat<T>::Ones(1, channels);
        beta = Mat<T>::Zero(1, channels);
        groups = norm_groups(channels, group_size);
    }
};

template <class T>
struct GroupNormGrad {
    Mat<T> gamma, beta;
    void zero_like(const GroupNorm<T>& p) {
        gamma = Mat<T>::Zero(1, p.gamma.cols());
        beta = Mat<T>::Zero(1, p.beta.cols());
    }
};

template <class T>
struct GroupNormCache {
    Mat<T> xhat;                // normalized pre-affine values
    std::vector<T> inv_std;     // per group
};

template <class T>
void group_norm_forward(const GroupNorm<T>& p, const Mat<T>& x, Mat<T>& y,
                        GroupNormCache<T>& cache) {
    const int C = static_cast<int>(x.cols());
    const int gs = C / p.groups;
    cache.xhat.resize(x.rows(), x.cols());
    cache.inv_std.assign(p.groups, T(0));
    y.resize(x.rows(), x.cols());
    for (int g = 0; g < p.groups; ++g) {
        auto blk = x.middleCols(g * gs, gs);
        const T mean = blk.mean();
        const T var = (blk.array() - mean).square().mean();
        const T inv = T(1) / std::sqrt(var + GroupNorm<T>::kEps);
        cache.inv_std[g] = inv;
        cache.xhat.middleCols(g * gs, gs) = (blk.array() - mean) * inv;
    }
    for (int c = 0; c < C; ++c)
        y.col(c) = cache.xhat.col(c) * p.gamma(0, c) + Mat<T>::Constant(x.rows(), 1, p.beta(0, c));
}

template <class T>
void group_norm_backward(const GroupNorm<T>& p, const GroupNormCache<T>& cache, const Mat<T>& dy,
                         GroupNormGrad<T>& g, Mat<T>& dx) {
    const int C = static_cast<int>(dy.cols());
    const int gs = C / p.groups;
    dx.resize(dy.rows(), dy.cols());
    for (int c = 0; c < C; ++c) {
        g.gamma(0, c) += (dy.col(c).array() * cache.xhat.col(c).array()).sum();
        g.beta(0, c) += dy.col(c).sum();
    }
    for (int grp = 0; grp < p.groups; ++grp) {
        auto dyb = dy.middleCols(grp * gs, gs);
        auto xh = cache.xhat.middleCols(grp * gs, gs);
        // dxhat = dy * gamma (per channel)
        Mat<T> dxhat(dyb.rows(), gs);
        for (int j = 0; j < gs; ++j) dxhat.col(j) = dyb.col(j) * p.gamma(0, grp * gs + j);
        const T m1 = dxhat.mean();
        const T m2 = (dxhat.array() * xh.array()).mean();
        dx.middleCols(grp * gs, gs) =
            ((dxhat.array() - m1) - xh.array() * m2) * cache.inv_std[grp];
    }
}

// ---------------------------------------------------------------- SiLU

template <class T>
void silu_forward(const Mat<T>& x, Mat<T>& y) {
    y = x.array() / (T(1) + (-x.array()).exp());
}

// cache = the SiLU input.
template <class T>
void silu_backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dx) {
    auto s = (T(1) / (T(1) + (-x.array()).exp())).eval();
    dx = dy.array() * s * (T(1) + x.array() * (T(1) - s));
}

// ---------------------------------------------------------------- resampling

// 2x2 mean pooling; H and W must be even.
template <class T>
void avgpool2_forward(const Mat<T>& x, int H, int W, Mat<T>& y) {
    const int C = static_cast<int>(x.cols());
    const int h = H / 2, w = W / 2;
    y.resize(static_cast<long>(h) * w, C);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < h; ++r)
            for (int q = 0; q < w; ++q)
                y(static_cast<long>(r) * w + q, c) =
                    T(0.25) * (x(static_cast<long>(2 * r) * W + 2 * q, c) +
                               x(static_cast<long>(2 * r) * W + 2 * q + 1, c) +
                               x(static_cast<long>(2 * r + 1) * W + 2 * q, c) +
                               x(static_cast<long>(2 * r + 1) * W + 2 * q + 1, c));
}

template <class T>
void avgpool2_backward(const Mat<T>& dy, int H, int W, Mat<T>& dx) {
    const int C = static_cast<int>(dy.cols());
    const int h = H / 2, w = W / 2;
    dx.resize(static_cast<long>(H) * W, C);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < h; ++r)
            for (int q = 0; q < w; ++q) {
                const T v = T(0.25) * dy(static_cast<long>(r) * w + q, c);
                dx(static_cast<long>(2 * r) * W + 2 * q, c) = v;
                dx(static_cast<long>(2 * r) * W + 2 * q + 1, c) = v;
                dx(static_cast<long>(2 * r + 1) * W + 2 * q, c) = v;
                dx(static_cast<long>(2 * r + 1) * W + 2 * q + 1, c) = v;
            }
}

// Nearest-neighbor 2x upsampling from (h,w) to (2h,2w).
template <class T>
void upsample2_forward(const Mat<T>& x, int h, int w, Mat<T>& y) {
    const int C = static_cast<int>(x.cols());
    const int H = 2 * h, W = 2 * w;
    y.resize(static_cast<long>(H) * W, C);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < h; ++r)
            for (int q = 0; q < w; ++q) {
                const T v = x(static_cast<long>(r) * w + q, c);
                y(static_cast<long>(2 * r) * W + 2 * q, c) = v;
                y(static_cast<long>(2 * r) * W + 2 * q + 1, c) = v;
                y(static_cast<long>(2 * r + 1) * W + 2 * q, c) = v;
                y(static_cast<long>(2 * r + 1) * W + 2 * q + 1, c) = v;
            }
}

template <class T>
void upsample2_backward(const Mat<T>& dy, int h, int w, Mat<T>& dx) {
    const int C = static_cast<int>(dy.cols());
    const int W = 2 * w;
    dx.resize(static_cast<long>(h) * w, C);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < h; ++r)
            for (int q = 0; q < w; ++q)
                dx(static_cast<long>(r) * w + q, c) =
                    dy(static_cast<long>(2 * r) * W + 2 * q, c) +
                    dy(static_cast<long>(2 * r) * W + 2 * q + 1, c) +
                    dy(static_cast<long>(2 * r + 1) * W + 2 * q, c) +
                    dy(static_cast<long>(2 * r + 1) * W + 2 * q + 1, c);
}

// ---------------------------------------------------------------- time embedding

template <class T>
struct Linear {
    Mat<T> W;  // in x out
    Mat<T> b;  // 1 x out

    void init(int in, int out, SplitMix64& rng, double w_std) {
        W.resize(in, out);
        for (long j = 0; j < W.cols(); ++j)
            for (long i = 0; i < W.rows(); ++i)
                W(i, j) = static_cast<T>(sample_normal(rng) * w_std);
        b = Mat<T>::Zero(1, out);
    }
};

template <class T>
struct LinearGrad {
    Mat<T> W, b;
    void zero_like(const Linear<T>& p) {
        W = Mat<T>::Zero(p.W.rows(), p.W.cols());
        b = Mat<T>::Zero(1, p.b.cols());
    }
};

// Standard sinusoidal embedding of a (1-based) timestep.
template <class T>
Mat<T> sinusoidal_embedding(double t, int dim) {
    const int half = dim / 2;
    Mat<T> e(1, dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        e(0, i) = static_cast<T>(std::sin(t * freq));
        e(0, half + i) = static_cast<T>(std::cos(t * freq));
    }
    return e;
}

}  // namespace gard::nn

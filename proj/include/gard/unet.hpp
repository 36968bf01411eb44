#pragma once

// Time-conditioned 3-level U-Net on top of the nn layer toolkit. The network
// object holds parameters only; activations live in a caller-owned cache, so a
// const network can serve concurrent predictions.

#include <string>
#include <vector>

#include "gard/denoiser.hpp"
#include "gard/nn.hpp"

namespace gard::nn {

template <class T>
struct Stage {
    Conv3x3<T> conv1, conv2;
    GroupNorm<T> gn1, gn2;
    Linear<T> tproj;  // time embedding -> per-channel bias after gn1

    void init(int cin, int cout, int time_dim, int group_size, SplitMix64& rng) {
        conv1.init_he(cin, cout, rng);
        conv2.init_he(cout, cout, rng);
        gn1.init(cout, group_size);
        gn2.init(cout, group_size);
        tproj.init(time_dim, cout, rng, std::sqrt(1.0 / time_dim));
    }
};

template <class T>
struct StageGrad {
    Conv3x3Grad<T> conv1, conv2;
    GroupNormGrad<T> gn1, gn2;
    LinearGrad<T> tproj;

    void zero_like(const Stage<T>& s) {
        conv1.zero_like(s.conv1);
        conv2.zero_like(s.conv2);
        gn1.zero_like(s.gn1);
        gn2.zero_like(s.gn2);
        tproj.zero_like(s.tproj);
    }
};

template <class T>
struct StageCache {
    Mat<T> col1, col2;          // im2col inputs of the two convs
    GroupNormCache<T> gn1, gn2;
    Mat<T> pre1, pre2;          // SiLU inputs
    Mat<T> scratch;             // dcol buffer for backward
};

template <class T>
Mat<T> stage_forward(const Stage<T>& s, const Mat<T>& x, int H, int W, const Mat<T>& temb,
                     StageCache<T>& c) {
    Mat<T> a, n, out;
    conv3x3_forward(s.conv1, x, H, W, a, c.col1);
    group_norm_forward(s.gn1, a, n, c.gn1);
    Mat<T> tbias = temb * s.tproj.W + s.tproj.b;
    n.rowwise() += tbias.row(0);
    c.pre1 = n;
    silu_forward(c.pre1, a);
    conv3x3_forward(s.conv2, a, H, W, n, c.col2);
    group_norm_forward(s.gn2, n, c.pre2, c.gn2);
    silu_forward(c.pre2, out);
    return out;
}

template <class T>
Mat<T> stage_backward(const Stage<T>& s, const Mat<T>& dout, int H, int W, const Mat<T>& temb,
                      StageCache<T>& c, StageGrad<T>& g) {
    Mat<T> d1, d2, dx;
    silu_backward(c.pre2, dout, d1);
    group_norm_backward(s.gn2, c.gn2, d1, g.gn2, d2);
    conv3x3_backward(s.conv2, c.col2, d2, H, W, g.conv2, d1, c.scratch);
    silu_backward(c.pre1, d1, d2);
    Mat<T> dtbias = d2.colwise().sum();
    g.tproj.W.noalias() += temb.transpose() * dtbias;
    g.tproj.b += dtbias;
    group_norm_backward(s.gn1, c.gn1, d2, g.gn1, d1);
    conv3x3_backward(s.conv1, c.col1, d1, H, W, g.conv1, dx, c.scratch);
    return dx;
}

template <class T>
struct TensorRef {
    std::string name;
    Mat<T>* value;
};

template <class T>
struct UNetNet {
    UNetSpec spec;
    Stage<T> enc1, enc2, mid, dec2, dec1;
    Conv3x3<T> out_conv;

    void init(const UNetSpec& sp, std::uint64_t seed) {
        spec = sp;
        SplitMix64 rng(seed);
        const int b = sp.base_channels;
        enc1.init(1, b, sp.time_dim, sp.group_size, rng);
        enc2.init(b, 2 * b, sp.time_dim, sp.group_size, rng);
        mid.init(2 * b, 4 * b, sp.time_dim, sp.group_size, rng);
        dec2.init(6 * b, 2 * b, sp.time_dim, sp.group_size, rng);
        dec1.init(3 * b, b, sp.time_dim, sp.group_size, rng);
        out_conv.init(b, 1, rng, 0.0);  // zero init: the net starts as the zero map
    }

    std::vector<TensorRef<T>> params() {
        std::vector<TensorRef<T>> out;
        auto stage = [&out](const char* prefix, Stage<T>& s) {
            out.push_back({std::string(prefix) + ".conv1.W", &s.conv1.W});
            out.push_back({std::string(prefix) + ".conv1.b", &s.conv1.b});
            out.push_back({std::string(prefix) + ".conv2.W", &s.conv2.W});
            out.push_back({std::string(prefix) + ".conv2.b", &s.conv2.b});
            out.push_back({std::string(prefix) + ".gn1.gamma", &s.gn1.gamma});
            out.push_back({std::string(prefix) + ".gn1.beta", &s.gn1.beta});
            out.push_back({std::string(prefix) + ".gn2.gamma", &s.gn2.gamma});
            out.push_back({std::string(prefix) + ".gn2.beta", &s.gn2.beta});
            out.push_back({std::string(prefix) + ".tproj.W", &s.tproj.W});
            out.push_back({std::string(prefix) + ".tproj.b", &s.tproj.b});
        };
        stage("enc1", enc1);
        stage("enc2", enc2);
        stage("mid", mid);
        stage("dec2", dec2);
        stage("dec1", dec1);
        out.push_back({"out.W", &out_conv.W});
        out.push_back({"out.b", &out_conv.b});
        return out;
    }
};

template <class T>
struct UNetGrads {
    StageGrad<T> enc1, enc2, mid, dec2, dec1;
    Conv3x3Grad<T> out_conv;

    void zero_like(const UNetNet<T>& n) {
        enc1.zero_like(n.enc1);
        enc2.zero_like(n.enc2);
        mid.zero_like(n.mid);
        dec2.zero_like(n.dec2);
        dec1.zero_like(n.dec1);
        out_conv.zero_like(n.out_conv);
    }

    std::vector<Mat<T>*> tensors() {
        std::vector<Mat<T>*> out;
        auto stage = [&out](StageGrad<T>& s) {
            out.push_back(&s.conv1.W);
            out.push_back(&s.conv1.b);
            out.push_back(&s.conv2.W);
            out.push_back(&s.conv2.b);
            out.push_back(&s.gn1.gamma);
            out.push_back(&s.gn1.beta);
            out.push_back(&s.gn2.gamma);
            out.push_back(&s.gn2.beta);
            out.push_back(&s.tproj.W);
            out.push_back(&s.tproj.b);
        };
        stage(enc1);
        stage(enc2);
        stage(mid);
        stage(dec2);
        stage(dec1);
        out.push_back(&out_conv.W);
        out.push_back(&out_conv.b);
        return out;
    }
};

template <class T>
struct UNetCache {
    int H = 0, W = 0;
    Mat<T> temb;
    StageCache<T> enc1, enc2, mid, dec2, dec1;
    Mat<T> e1, e2;       // skip activations (shapes needed for splitting)
    Mat<T> out_col;      // im2col of the output conv
    Mat<T> out_scratch;
};

// x: (H*W) x 1, H and W divisible by 4. Returns the predicted noise field.
template <class T>
Mat<T> unet_forward(const UNetNet<T>& net, const Mat<T>& x, int H, int W, int t,
                    UNetCache<T>& c) {
    c.H = H;
    c.W = W;
    c.temb = sinusoidal_embedding<T>(static_cast<double>(t), net.spec.time_dim);
    c.e1 = stage_forward(net.enc1, x, H, W, c.temb, c.enc1);
    Mat<T> p1;
    avgpool2_forward(c.e1, H, W, p1);
    c.e2 = stage_forward(net.enc2, p1, H / 2, W / 2, c.temb, c.enc2);
    Mat<T> p2;
    avgpool2_forward(c.e2, H / 2, W / 2, p2);
    Mat<T> m = stage_forward(net.mid, p2, H / 4, W / 4, c.temb, c.mid);
    Mat<T> u2;
    upsample2_forward(m, H / 4, W / 4, u2);
    Mat<T> cat2(u2.rows(), u2.cols() + c.e2.cols());
    cat2 << u2, c.e2;
    Mat<T> d2 = stage_forward(net.dec2, cat2, H / 2, W / 2, c.temb, c.dec2);
    Mat<T> u1;
    upsample2_forward(d2, H / 2, W / 2, u1);
    Mat<T> cat1(u1.rows(), u1.cols() + c.e1.cols());
    cat1 << u1, c.e1;
    Mat<T> d1 = stage_forward(net.dec1, cat1, H, W, c.temb, c.dec1);
    Mat<T> y;
    conv3x3_forward(net.out_conv, d1, H, W, y, c.out_col);
    return y;
}

template <class T>
Mat<T> unet_backward(const UNetNet<T>& net, const Mat<T>& dy, UNetCache<T>& c, UNetGrads<T>& g) {
    const int H = c.H, W = c.W;
    const int b = net.spec.base_channels;
    Mat<T> dd1, dcol;
    conv3x3_backward(net.out_conv, c.out_col, dy, H, W, g.out_conv, dd1, c.out_scratch);
    Mat<T> dcat1 = stage_backward(net.dec1, dd1, H, W, c.temb, c.dec1, g.dec1);
    Mat<T> dd2;
    upsample2_backward(Mat<T>(dcat1.leftCols(2 * b)), H / 2, W / 2, dd2);
    Mat<T> dcat2 = stage_backward(net.dec2, dd2, H / 2, W / 2, c.temb, c.dec2, g.dec2);
    Mat<T> dm;
    upsample2_backward(Mat<T>(dcat2.leftCols(4 * b)), H / 4, W / 4, dm);
    Mat<T> dp2 = stage_backward(net.mid, dm, H / 4, W / 4, c.temb, c.mid, g.mid);
    Mat<T> de2;
    avgpool2_backward(dp2, H / 2, W / 2, de2);
    de2 += dcat2.rightCols(2 * b);
    Mat<T> dp1 = stage_backward(net.enc2, de2, H / 2, W / 2, c.temb, c.enc2, g.enc2);
    Mat<T> de1;
    avgpool2_backward(dp1, H, W, de1);
    de1 += dcat1.rightCols(b);
    return stage_backward(net.enc1, de1, H, W, c.temb, c.enc1, g.enc1);
}

// Decoupled-weight-decay Adam over the network parameters.
template <class T>
struct AdamW {
    double lr = 3e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 1e-4;
    long step_count = 0;
    std::vector<Mat<T>> m, v;

    void init(UNetNet<T>& net) {
        auto ps = net.params();
        m.clear();
        v.clear();
        for (auto& p : ps) {
            m.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
            v.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
        }
    }

    void step(UNetNet<T>& net, UNetGrads<T>& grads) {
        auto ps = net.params();
        auto gs = grads.tensors();
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t i = 0; i < ps.size(); ++i) {
            Mat<T>& p = *ps[i].value;
            Mat<T>& gr = *gs[i];
            m[i] = static_cast<T>(beta1) * m[i] + static_cast<T>(1.0 - beta1) * gr;
            v[i] = static_cast<T>(beta2) * v[i].array().matrix() +
                   static_cast<T>(1.0 - beta2) * gr.array().square().matrix();
            auto mhat = (m[i].array() / static_cast<T>(bc1)).eval();
            auto vhat = (v[i].array() / static_cast<T>(bc2)).eval();
            p.array() -= static_cast<T>(lr) *
                         (mhat / (vhat.sqrt() + static_cast<T>(eps)) +
                          static_cast<T>(weight_decay) * p.array());
        }
    }
};

}  // namespace gard::nn

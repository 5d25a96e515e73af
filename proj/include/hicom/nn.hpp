#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "hicom/rng.hpp"

namespace hicom::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Flat view over one parameter tensor; value and grad share layout.
struct ParamView {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    long size = 0;
};

// Flattened parameter access for the optimizer, checkpoints and
// finite-difference checks.
struct ParamSet {
    std::vector<ParamView> views;

    long total() const;
    void zero_grad();
    Vec gather_values() const;
    Vec gather_grads() const;
    void scatter_values(const Vec& flat);
};

// Elementwise GELU (exact erf form); smooth, so finite-difference
// gradient checks are well conditioned.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& dy, const Mat& x);

// y = W x + b applied column-wise; x is (in x N).
struct Linear {
    Mat W;
    Vec b;
    Mat gW;
    Vec gb;

    void init(int out_dim, int in_dim, Rng& rng);
    Mat forward(const Mat& x) const;
    // x must be the input that produced dy; accumulates parameter grads.
    Mat backward(const Mat& dy, const Mat& x);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// 2-D convolution over a planar image stored as (channels x H*W),
// implemented as im2col + GEMM. Zero padding.
struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
    Mat W;  // (out_c x in_c*k*k)
    Vec b;
    Mat gW;
    Vec gb;

    void init(int in_channels, int out_channels, int kernel, int stride_, int pad_, Rng& rng);
    int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
    int out_w(int w) const { return (w + 2 * pad - k) / stride + 1; }

    // Fills `cols` (in_c*k*k x out_h*out_w) as a side product for backward.
    Mat forward(const Mat& x, int h, int w, Mat& cols) const;
    // Returns dx (in_c x H*W).
    Mat backward(const Mat& dy, const Mat& cols, int h, int w);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// Per-token LayerNorm; tokens are columns of (D x T).
struct LayerNorm {
    Vec gamma, beta;
    Vec ggamma, gbeta;
    double eps = 1e-5;

    void init(int dim);
    Mat forward(const Mat& x) const;
    Mat backward(const Mat& dy, const Mat& x);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// Multi-head self-attention over a token matrix (D x T).
struct SelfAttention {
    int dim = 0, heads = 1;
    Linear qkv;   // D -> 3D
    Linear proj;  // D -> D

    struct Ctx {
        Mat x;    // input tokens
        Mat qkv_out;
        std::vector<Mat> attn;  // per head (T x T)
        Mat concat;             // pre-projection head outputs (D x T)
    };

    void init(int dim_, int heads_, Rng& rng);
    Mat forward(const Mat& x, Ctx& ctx) const;
    Mat backward(const Mat& dy, const Ctx& ctx);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// Softmax cross entropy over logits (C x N), mean over columns.
double softmax_ce(const Mat& logits, const std::vector<int>& targets, Mat* dlogits);
// Softmax probabilities of one column vector of logits.
Vec softmax(const Vec& logits);

// Attention pooling of a token set: alpha = softmax(w^T u_i), out = sum alpha_i u_i.
struct AttentionPool {
    Vec w;
    Vec gw;

    struct Ctx {
        Mat u;
        Vec alpha;
    };

    void init(int dim, Rng& rng);
    Vec forward(const Mat& u, Ctx& ctx) const;
    Mat backward(const Vec& dout, const Ctx& ctx);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vec m, v;
    long t = 0;

    void step(ParamSet& params, double lr);
};

}  // namespace hicom::nn

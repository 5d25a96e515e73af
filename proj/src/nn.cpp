#include "hicom/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hicom::nn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double xavier_scale(int fan_in, int fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(Mat& m, double scale, Rng& rng) {
    for (long j = 0; j < m.cols(); ++j)
        for (long i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-scale, scale);
}

}  // namespace

long ParamSet::total() const {
    long n = 0;
    for (const auto& v : views) n += v.size;
    return n;
}

void ParamSet::zero_grad() {
    for (auto& v : views)
        for (long i = 0; i < v.size; ++i) v.grad[i] = 0.0;
}

Vec ParamSet::gather_values() const {
    Vec out(total());
    long off = 0;
    for (const auto& v : views) {
        for (long i = 0; i < v.size; ++i) out[off + i] = v.value[i];
        off += v.size;
    }
    return out;
}

Vec ParamSet::gather_grads() const {
    Vec out(total());
    long off = 0;
    for (const auto& v : views) {
        for (long i = 0; i < v.size; ++i) out[off + i] = v.grad[i];
        off += v.size;
    }
    return out;
}

void ParamSet::scatter_values(const Vec& flat) {
    if (flat.size() != total()) throw std::invalid_argument("ParamSet: size mismatch");
    long off = 0;
    for (auto& v : views) {
        for (long i = 0; i < v.size; ++i) v.value[i] = flat[off + i];
        off += v.size;
    }
}

Mat gelu(const Mat& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Mat gelu_backward(const Mat& dy, const Mat& x) {
    Mat dx = x;
    for (long j = 0; j < x.cols(); ++j)
        for (long i = 0; i < x.rows(); ++i) {
            double v = x(i, j);
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            dx(i, j) = dy(i, j) * (cdf + v * pdf);
        }
    return dx;
}

void Linear::init(int out_dim, int in_dim, Rng& rng) {
    W.resize(out_dim, in_dim);
    fill_uniform(W, xavier_scale(in_dim, out_dim), rng);
    b = Vec::Zero(out_dim);
    gW = Mat::Zero(out_dim, in_dim);
    gb = Vec::Zero(out_dim);
}

Mat Linear::forward(const Mat& x) const {
    return (W * x).colwise() + b;
}

Mat Linear::backward(const Mat& dy, const Mat& x) {
    gW.noalias() += dy * x.transpose();
    gb.noalias() += dy.rowwise().sum();
    return W.transpose() * dy;
}

void Linear::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), static_cast<long>(W.size())});
    out.push_back({prefix + ".b", b.data(), gb.data(), static_cast<long>(b.size())});
}

void Conv2d::init(int in_channels, int out_channels, int kernel, int stride_, int pad_, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    k = kernel;
    stride = stride_;
    pad = pad_;
    W.resize(out_c, in_c * k * k);
    fill_uniform(W, xavier_scale(in_c * k * k, out_c), rng);
    b = Vec::Zero(out_c);
    gW = Mat::Zero(out_c, in_c * k * k);
    gb = Vec::Zero(out_c);
}

Mat Conv2d::forward(const Mat& x, int h, int w, Mat& cols) const {
    const int oh = out_h(h), ow = out_w(w);
    cols.resize(static_cast<long>(in_c) * k * k, static_cast<long>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const long col = static_cast<long>(oy) * ow + ox;
            long row = 0;
            for (int c = 0; c < in_c; ++c)
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox * stride - pad + kx;
                        cols(row, col) = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                             ? x(c, static_cast<long>(iy) * w + ix)
                                             : 0.0;
                    }
                }
        }
    }
    return (W * cols).colwise() + b;
}

Mat Conv2d::backward(const Mat& dy, const Mat& cols, int h, int w) {
    gW.noalias() += dy * cols.transpose();
    gb.noalias() += dy.rowwise().sum();
    Mat dcols = W.transpose() * dy;  // (in_c*k*k x oh*ow)

    const int oh = out_h(h), ow = out_w(w);
    Mat dx = Mat::Zero(in_c, static_cast<long>(h) * w);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const long col = static_cast<long>(oy) * ow + ox;
            long row = 0;
            for (int c = 0; c < in_c; ++c)
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox * stride - pad + kx;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            dx(c, static_cast<long>(iy) * w + ix) += dcols(row, col);
                    }
                }
        }
    }
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), static_cast<long>(W.size())});
    out.push_back({prefix + ".b", b.data(), gb.data(), static_cast<long>(b.size())});
}

void LayerNorm::init(int dim) {
    gamma = Vec::Ones(dim);
    beta = Vec::Zero(dim);
    ggamma = Vec::Zero(dim);
    gbeta = Vec::Zero(dim);
}

Mat LayerNorm::forward(const Mat& x) const {
    Mat y(x.rows(), x.cols());
    const double d = static_cast<double>(x.rows());
    for (long j = 0; j < x.cols(); ++j) {
        double mu = x.col(j).mean();
        double var = (x.col(j).array() - mu).square().sum() / d;
        double inv = 1.0 / std::sqrt(var + eps);
        y.col(j) = ((x.col(j).array() - mu) * inv).matrix().cwiseProduct(gamma) + beta;
    }
    return y;
}

Mat LayerNorm::backward(const Mat& dy, const Mat& x) {
    Mat dx(x.rows(), x.cols());
    const double d = static_cast<double>(x.rows());
    for (long j = 0; j < x.cols(); ++j) {
        double mu = x.col(j).mean();
        double var = (x.col(j).array() - mu).square().sum() / d;
        double inv = 1.0 / std::sqrt(var + eps);
        Vec xhat = ((x.col(j).array() - mu) * inv).matrix();
        Vec dxhat = dy.col(j).cwiseProduct(gamma);
        ggamma += dy.col(j).cwiseProduct(xhat);
        gbeta += dy.col(j);
        double m1 = dxhat.mean();
        double m2 = dxhat.cwiseProduct(xhat).mean();
        dx.col(j) = inv * (dxhat.array() - m1 - xhat.array() * m2).matrix();
    }
    return dx;
}

void LayerNorm::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".gamma", gamma.data(), ggamma.data(), static_cast<long>(gamma.size())});
    out.push_back({prefix + ".beta", beta.data(), gbeta.data(), static_cast<long>(beta.size())});
}

void SelfAttention::init(int dim_, int heads_, Rng& rng) {
    dim = dim_;
    heads = heads_;
    if (dim % heads != 0) throw std::invalid_argument("SelfAttention: dim % heads != 0");
    qkv.init(3 * dim, dim, rng);
    proj.init(dim, dim, rng);
}

Mat SelfAttention::forward(const Mat& x, Ctx& ctx) const {
    const long t = x.cols();
    const int dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ctx.x = x;
    ctx.qkv_out = qkv.forward(x);  // (3D x T)
    ctx.attn.assign(heads, Mat());
    ctx.concat.resize(dim, t);

    for (int h = 0; h < heads; ++h) {
        auto q = ctx.qkv_out.middleRows(h * dh, dh);
        auto k = ctx.qkv_out.middleRows(dim + h * dh, dh);
        auto v = ctx.qkv_out.middleRows(2 * dim + h * dh, dh);
        Mat s = (q.transpose() * k) * scale;  // (T x T), row = query
        for (long i = 0; i < t; ++i) {
            double mx = s.row(i).maxCoeff();
            Eigen::ArrayXd e = (s.row(i).array() - mx).exp();
            s.row(i) = (e / e.sum()).matrix();
        }
        ctx.attn[h] = s;
        ctx.concat.middleRows(h * dh, dh) = v * s.transpose();
    }
    return proj.forward(ctx.concat);
}

Mat SelfAttention::backward(const Mat& dy, const Ctx& ctx) {
    const long t = ctx.x.cols();
    const int dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dconcat = proj.backward(dy, ctx.concat);
    Mat dqkv = Mat::Zero(3 * dim, t);

    for (int h = 0; h < heads; ++h) {
        auto q = ctx.qkv_out.middleRows(h * dh, dh);
        auto k = ctx.qkv_out.middleRows(dim + h * dh, dh);
        auto v = ctx.qkv_out.middleRows(2 * dim + h * dh, dh);
        const Mat& a = ctx.attn[h];
        Mat dout = dconcat.middleRows(h * dh, dh);  // (dh x T)

        Mat dv = dout * a;                 // (dh x T)
        Mat da = dout.transpose() * v;     // (T x T): da[t,s]
        Mat ds(t, t);
        for (long i = 0; i < t; ++i) {
            double dot = a.row(i).dot(da.row(i));
            ds.row(i) = a.row(i).cwiseProduct(da.row(i) - Eigen::RowVectorXd::Constant(t, dot));
        }
        dqkv.middleRows(h * dh, dh) = k * ds.transpose() * scale;
        dqkv.middleRows(dim + h * dh, dh) = q * ds * scale;
        dqkv.middleRows(2 * dim + h * dh, dh) = dv;
    }
    return qkv.backward(dqkv, ctx.x);
}

void SelfAttention::collect(const std::string& prefix, std::vector<ParamView>& out) {
    qkv.collect(prefix + ".qkv", out);
    proj.collect(prefix + ".proj", out);
}

Vec softmax(const Vec& logits) {
    double mx = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.array() - mx).exp();
    return (e / e.sum()).matrix();
}

double softmax_ce(const Mat& logits, const std::vector<int>& targets, Mat* dlogits) {
    if (static_cast<size_t>(logits.cols()) != targets.size())
        throw std::invalid_argument("softmax_ce: logits/targets mismatch");
    if (targets.empty()) throw std::invalid_argument("softmax_ce: empty batch");
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    double loss = 0.0;
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    for (long j = 0; j < logits.cols(); ++j) {
        Vec p = softmax(logits.col(j));
        loss -= std::log(std::max(p[targets[j]], 1e-300));
        if (dlogits) {
            dlogits->col(j) = p * inv_n;
            (*dlogits)(targets[j], j) -= inv_n;
        }
    }
    return loss * inv_n;
}

void AttentionPool::init(int dim, Rng& rng) {
    w.resize(dim);
    for (long i = 0; i < w.size(); ++i) w[i] = rng.uniform(-0.1, 0.1);
    gw = Vec::Zero(dim);
}

Vec AttentionPool::forward(const Mat& u, Ctx& ctx) const {
    ctx.u = u;
    Vec s = u.transpose() * w;
    double mx = s.maxCoeff();
    Eigen::ArrayXd e = (s.array() - mx).exp();
    ctx.alpha = (e / e.sum()).matrix();
    return u * ctx.alpha;
}

Mat AttentionPool::backward(const Vec& dout, const Ctx& ctx) {
    const long n = ctx.u.cols();
    Vec dalpha = ctx.u.transpose() * dout;
    double dot = ctx.alpha.dot(dalpha);
    Vec ds = ctx.alpha.cwiseProduct(dalpha - Vec::Constant(n, dot));
    gw += ctx.u * ds;
    Mat du = dout * ctx.alpha.transpose();  // (D x n)
    du += w * ds.transpose();
    return du;
}

void AttentionPool::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".w", w.data(), gw.data(), static_cast<long>(w.size())});
}

void Adam::step(ParamSet& params, double lr) {
    const long n = params.total();
    if (m.size() != n) {
        m = Vec::Zero(n);
        v = Vec::Zero(n);
        t = 0;
    }
    ++t;
    Vec g = params.gather_grads();
    Vec x = params.gather_values();
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (long i = 0; i < n; ++i)
        x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    params.scatter_values(x);
}

}  // namespace hicom::nn

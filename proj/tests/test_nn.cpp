#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hicom/nn.hpp"
#include "hicom/rng.hpp"
#include "test_util.hpp"

using namespace hicom;
using nn::Mat;
using nn::Vec;

namespace {

Mat random_mat(long r, long c, Rng& rng) {
    Mat m(r, c);
    for (long j = 0; j < c; ++j)
        for (long i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("linear layer gradients match finite differences") {
    Rng rng(11);
    nn::Linear lin;
    lin.init(5, 7, rng);
    Mat x = random_mat(7, 4, rng);
    Mat cw = random_mat(5, 4, rng);  // random linear functional of the output

    nn::ParamSet p;
    lin.collect("lin", p.views);
    auto loss = [&](bool with_grad) {
        Mat y = lin.forward(x);
        if (with_grad) lin.backward(cw, x);
        return (y.array() * cw.array()).sum();
    };
    CHECK(testutil::grad_check(p, loss, 30, 1e-5, rng) < 1e-6);
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(12);
    nn::Conv2d conv;
    conv.init(3, 4, 3, 2, 1, rng);
    const int h = 9, w = 8;
    Mat x = random_mat(3, h * w, rng);
    const int oh = conv.out_h(h), ow = conv.out_w(w);
    Mat cw = random_mat(4, oh * ow, rng);

    nn::ParamSet p;
    conv.collect("conv", p.views);
    Mat cols;
    auto loss = [&](bool with_grad) {
        Mat y = conv.forward(x, h, w, cols);
        if (with_grad) conv.backward(cw, cols, h, w);
        return (y.array() * cw.array()).sum();
    };
    CHECK(testutil::grad_check(p, loss, 30, 1e-5, rng) < 1e-6);
}

TEST_CASE("conv2d input gradient matches finite differences") {
    Rng rng(13);
    nn::Conv2d conv;
    conv.init(2, 3, 3, 1, 1, rng);
    const int h = 6, w = 5;
    Mat x = random_mat(2, h * w, rng);
    Mat cw = random_mat(3, h * w, rng);
    Mat cols;
    conv.forward(x, h, w, cols);
    Mat dx = conv.backward(cw, cols, h, w);

    double eps = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        long i = static_cast<long>(rng.next_below(2));
        long j = static_cast<long>(rng.next_below(h * w));
        Mat xp = x, xm = x;
        xp(i, j) += eps;
        xm(i, j) -= eps;
        Mat c2;
        double lp = (conv.forward(xp, h, w, c2).array() * cw.array()).sum();
        double lm = (conv.forward(xm, h, w, c2).array() * cw.array()).sum();
        double fd = (lp - lm) / (2 * eps);
        CHECK(dx(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("conv2d agrees with direct convolution") {
    Rng rng(14);
    nn::Conv2d conv;
    conv.init(2, 3, 3, 2, 1, rng);
    const int h = 7, w = 6;
    Mat x = random_mat(2, h * w, rng);
    Mat cols;
    Mat y = conv.forward(x, h, w, cols);

    const int oh = conv.out_h(h), ow = conv.out_w(w);
    for (int oc = 0; oc < 3; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = conv.b[oc];
                for (int ic = 0; ic < 2; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += conv.W(oc, (ic * 3 + ky) * 3 + kx) * x(ic, iy * w + ix);
                        }
                CHECK(y(oc, oy * ow + ox) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("layernorm gradients match finite differences") {
    Rng rng(15);
    nn::LayerNorm ln;
    ln.init(6);
    // non-trivial gamma/beta
    for (int i = 0; i < 6; ++i) { ln.gamma[i] = 1.0 + 0.1 * i; ln.beta[i] = 0.05 * i; }
    Mat x = random_mat(6, 5, rng);
    Mat cw = random_mat(6, 5, rng);

    nn::ParamSet p;
    ln.collect("ln", p.views);
    auto loss = [&](bool with_grad) {
        Mat y = ln.forward(x);
        if (with_grad) ln.backward(cw, x);
        return (y.array() * cw.array()).sum();
    };
    CHECK(testutil::grad_check(p, loss, 30, 1e-5, rng) < 1e-6);

    // input gradient
    ln.ggamma.setZero();
    ln.gbeta.setZero();
    Mat dx = ln.backward(cw, x);
    double eps = 1e-6;
    for (int trial = 0; trial < 15; ++trial) {
        long i = static_cast<long>(rng.next_below(6));
        long j = static_cast<long>(rng.next_below(5));
        Mat xp = x, xm = x;
        xp(i, j) += eps;
        xm(i, j) -= eps;
        double lp = (ln.forward(xp).array() * cw.array()).sum();
        double lm = (ln.forward(xm).array() * cw.array()).sum();
        CHECK(dx(i, j) == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-4));
    }
}

TEST_CASE("self-attention gradients match finite differences") {
    Rng rng(16);
    nn::SelfAttention attn;
    attn.init(8, 2, rng);
    Mat x = random_mat(8, 5, rng);
    Mat cw = random_mat(8, 5, rng);

    nn::ParamSet p;
    attn.collect("attn", p.views);
    nn::SelfAttention::Ctx ctx;
    auto loss = [&](bool with_grad) {
        Mat y = attn.forward(x, ctx);
        if (with_grad) attn.backward(cw, ctx);
        return (y.array() * cw.array()).sum();
    };
    CHECK(testutil::grad_check(p, loss, 40, 1e-5, rng) < 1e-5);

    // input gradient
    p.zero_grad();
    attn.forward(x, ctx);
    Mat dx = attn.backward(cw, ctx);
    double eps = 1e-6;
    for (int trial = 0; trial < 15; ++trial) {
        long i = static_cast<long>(rng.next_below(8));
        long j = static_cast<long>(rng.next_below(5));
        Mat xp = x, xm = x;
        xp(i, j) += eps;
        xm(i, j) -= eps;
        nn::SelfAttention::Ctx c2;
        double lp = (attn.forward(xp, c2).array() * cw.array()).sum();
        double lm = (attn.forward(xm, c2).array() * cw.array()).sum();
        CHECK(dx(i, j) == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-4));
    }
}

TEST_CASE("attention pool gradients match finite differences") {
    Rng rng(17);
    nn::AttentionPool pool;
    pool.init(6, rng);
    Mat u = random_mat(6, 7, rng);
    Vec cw(6);
    for (int i = 0; i < 6; ++i) cw[i] = rng.normal();

    nn::ParamSet p;
    pool.collect("pool", p.views);
    nn::AttentionPool::Ctx ctx;
    auto loss = [&](bool with_grad) {
        Vec y = pool.forward(u, ctx);
        if (with_grad) pool.backward(cw, ctx);
        return y.dot(cw);
    };
    CHECK(testutil::grad_check(p, loss, 30, 1e-5, rng) < 1e-6);
}

TEST_CASE("softmax cross entropy value and gradient") {
    Mat logits(2, 2);
    logits.setZero();
    double l = nn::softmax_ce(logits, {0, 1}, nullptr);
    CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng(18);
    Mat z = random_mat(3, 4, rng);
    std::vector<int> y = {0, 2, 1, 2};
    Mat dz;
    nn::softmax_ce(z, y, &dz);
    double eps = 1e-6;
    for (long j = 0; j < 4; ++j)
        for (long i = 0; i < 3; ++i) {
            Mat zp = z, zm = z;
            zp(i, j) += eps;
            zm(i, j) -= eps;
            double fd = (nn::softmax_ce(zp, y, nullptr) - nn::softmax_ce(zm, y, nullptr)) / (2 * eps);
            CHECK(dz(i, j) == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("gelu backward matches finite differences") {
    Rng rng(19);
    Mat x = random_mat(4, 5, rng);
    Mat dy = random_mat(4, 5, rng);
    Mat dx = nn::gelu_backward(dy, x);
    double eps = 1e-6;
    for (long j = 0; j < 5; ++j)
        for (long i = 0; i < 4; ++i) {
            Mat xp = x, xm = x;
            xp(i, j) += eps;
            xm(i, j) -= eps;
            double fd = ((nn::gelu(xp).array() * dy.array()).sum() -
                         (nn::gelu(xm).array() * dy.array()).sum()) /
                        (2 * eps);
            CHECK(dx(i, j) == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("adam minimizes a quadratic") {
    Rng rng(20);
    nn::Linear lin;
    lin.init(1, 3, rng);
    nn::ParamSet p;
    lin.collect("lin", p.views);
    nn::Adam adam;

    Mat x = random_mat(3, 16, rng);
    Mat w_true = random_mat(1, 3, rng);
    Mat target = w_true * x;  // realizable, so the loss can reach ~0
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 400; ++it) {
        p.zero_grad();
        Mat y = lin.forward(x);
        Mat d = y - target;
        lin.backward(2.0 * d / 16.0, x);
        double l = d.squaredNorm() / 16.0;
        if (it == 0) first = l;
        last = l;
        adam.step(p, 0.05);
    }
    CHECK(last < 0.01 * first);
}

TEST_CASE("rng streams are deterministic and fork independently") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    Rng c1 = c.fork(1);
    Rng c2 = c.fork(2);
    CHECK(c1.next_u64() != c2.next_u64());
    double u = Rng(3).uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}
